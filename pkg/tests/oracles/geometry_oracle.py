"""High-precision reference values for the optical gain fixtures.

Standalone: uses mpmath only, never imports the package.  Run it to
regenerate the constants frozen in test_geometry.py.
"""
from mpmath import mp, mpf, cos, sin, log, pi, sqrt, radians, acos

mp.dps = 40

G_OF = mpf(1)
KAPPA = mpf("1.5")
FOV = radians(75)
HALF_ANGLE = radians(60)
AREA = mpf("1e-4")
RHO = mpf("0.9")


def lambert(half):
    return -1 / (log(cos(half)) / log(2))


def conc(psi):
    return KAPPA**2 / sin(FOV) ** 2 if 0 <= psi <= FOV else mpf(0)


def los(tx, rx):
    # tx faces down, rx faces up
    d = sqrt(sum((a - b) ** 2 for a, b in zip(tx, rx)))
    c = (tx[2] - rx[2]) / d
    m = lambert(HALF_ANGLE)
    psi = acos(c)
    return (m + 1) * AREA / (2 * pi * d**2) * c**m * c * G_OF * conc(psi)


def nlos(led, elem, lu):
    d1 = sqrt(sum((a - b) ** 2 for a, b in zip(led, elem)))
    d2 = sqrt(sum((a - b) ** 2 for a, b in zip(elem, lu)))
    cphi = (led[2] - elem[2]) / d1
    cpsi = (elem[2] - lu[2]) / d2
    m = lambert(HALF_ANGLE)
    return RHO * (m + 1) * AREA / (2 * pi * (d1 + d2) ** 2) * cphi**m * cpsi * G_OF * conc(acos(cpsi))


if __name__ == "__main__":
    M = [mpf(x) for x in ("3", "2", "3")]
    print("m(60deg)", lambert(HALF_ANGLE))
    print("m(30deg)", lambert(radians(30)))
    print("f(0)", conc(mpf(0)))
    print("los (3,2,3)->(3,2,0)", los(M, [mpf(3), mpf(2), mpf(0)]))
    print("los (3,2,3)->(4,2,0)", los(M, [mpf(4), mpf(2), mpf(0)]))
    print("nlos (3,2,3)->(0,3,1.5)->(3,4,0)", nlos(M, [mpf(0), mpf(3), mpf("1.5")], [mpf(3), mpf(4), mpf(0)]))
