"""Regenerates zakian_n5.txt.

Zakian's five-term inversion rests on the approximation
    e^p ~ sum_i K_i / (alpha_i - p)   (i over conjugate pairs, real part doubled)
given by the [M/N] = [9/10] Pade approximant of e^p. Its poles and
residues, one from each conjugate pair, are the constants. Requires mpmath.
"""
import mpmath as mp

mp.mp.dps = 50
M, N = 9, 10
taylor = [1 / mp.factorial(k) for k in range(M + N + 1)]
num, den = mp.pade(taylor, M, N)  # ascending coefficients
poles = mp.polyroots(list(reversed(den)), maxsteps=500, extraprec=200)
rows = []
for z in poles:
    if mp.im(z) < 0:
        continue
    # residue of num/den at z, sign flipped for the (alpha - p) form
    dden = sum(k * den[k] * z ** (k - 1) for k in range(1, len(den)))
    numz = sum(num[k] * z ** k for k in range(len(num)))
    rows.append((z, -numz / dden))
rows.sort(key=lambda r: mp.im(r[0]))
print("# Zakian N=5 constants, one per conjugate pair. Regenerate with regenerate_zakian.py.")
print("# re(alpha) im(alpha) re(K) im(K)")
for z, k in rows:
    print(" ".join(mp.nstr(v, 20) for v in (mp.re(z), mp.im(z), mp.re(k), mp.im(k))))
