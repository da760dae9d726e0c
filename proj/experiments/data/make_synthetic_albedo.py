"""Writes synthetic_albedo.csv: three smooth albedo spectra with mean albedos
0.15, 0.45 and 0.75 (dark basalt-like, mid palagonite-like, bright tephra-like)
on 50 bands between 0.4 and 2.5 micrometers."""
import math
from pathlib import Path

L = 50
wl = [0.4 + 2.1 * i / (L - 1) for i in range(L)]


def gauss(x, c, w):
    return math.exp(-((x - c) / w) ** 2)


shapes = {
    # dark, deep 1 and 2 micrometer pyroxene-like bands
    "basalt": [1.1 - 0.1 * w - 0.6 * gauss(w, 1.0, 0.15) - 0.45 * gauss(w, 2.0, 0.3) for w in wl],
    # strong ferric red edge below 0.8 micrometers, hydration bands at 1.4 and 1.9
    "palagonite": [0.2 + 0.9 * (1 - math.exp(-((w - 0.4) / 0.25) ** 2)) - 0.15 * gauss(w, 1.4, 0.05)
                   - 0.35 * gauss(w, 1.9, 0.08) for w in wl],
    # bright, blue-sloped, shallow band near 1.2
    "tephra": [1.3 - 0.5 * (w - 0.4) / 2.1 - 0.15 * gauss(w, 1.2, 0.2) for w in wl],
}
means = {"basalt": 0.15, "palagonite": 0.45, "tephra": 0.75}

cols = {}
for name, g in shapes.items():
    avg = sum(g) / L
    cols[name] = [means[name] * v / avg for v in g]
    assert 0.0 < min(cols[name]) and max(cols[name]) <= 0.99, name

out = Path(__file__).with_name("synthetic_albedo.csv")
with out.open("w") as f:
    f.write("wavelength," + ",".join(cols) + "\n")
    for i in range(L):
        f.write(repr(round(wl[i], 6)) + "," + ",".join(repr(cols[n][i]) for n in cols) + "\n")
print(out)
