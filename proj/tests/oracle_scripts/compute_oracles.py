# Copyright 2026 The Posegen Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Independent reference values for the unit tests (scipy/numpy).

Run with python3; paste the printed constants into tests/oracles.hpp.
"""
import math

import numpy as np
from scipy import integrate, optimize, stats


def fnv1a64(s):
    h = 0xCBF29CE484222325
    for b in s.encode():
        h ^= b
        h = (h * 0x100000001B3) % (1 << 64)
    return h


def gmm1d_pdf(x, w, m, s):
    return sum(wi * stats.norm.pdf(x, mi, si) for wi, mi, si in zip(w, m, s))


def main():
    w, m, s = [0.7, 0.3], [-2.0, 3.0], [1.0, 1.0]
    pdf = lambda x: gmm1d_pdf(x, w, m, s)
    # Basin boundary: the density minimum between the two modes.
    boundary = optimize.minimize_scalar(pdf, bounds=(-2.0, 3.0), method="bounded",
                                        options={"xatol": 1e-12}).x
    print(f"kGmm73BasinBoundary = {boundary:.12f}")
    for t in (0.1, 0.3, 2.0):
        f = lambda x: pdf(x) ** (1.0 / t)
        z = integrate.quad(f, -30, 30, points=[-2, 3], limit=400, epsabs=1e-14)[0]
        left = integrate.quad(f, -30, boundary, points=[-2], limit=400, epsabs=1e-14)[0]
        print(f"T={t}: log Z_T = {math.log(z):.12f}, global-basin mass = {left / z:.12f}")
    for x in (-3.5, -2.0, 0.25, 3.0, 4.75):
        print(f"gmm73 log p({x}) = {math.log(pdf(x)):.12f}, cdf = "
              f"{sum(wi * stats.norm.cdf(x, mi, si) for wi, mi, si in zip(w, m, s)):.12f}")

    # Tempered resampling weights.
    lp = np.array([-1.0, -2.5, 0.3, -7.0])
    for t in (0.5, 1.0, 3.0):
        a = (1.0 / t - 1.0) * lp
        wts = np.exp(a - a.max())
        wts /= wts.sum()
        print(f"weights T={t}:", ", ".join(f"{v:.15g}" for v in wts))

    # 2-D diagonal mixture, K=2.
    W, MU, SD = [0.25, 0.75], [(0.2, 0.4), (0.6, 0.5)], [(0.05, 0.1), (0.2, 0.08)]
    for pt in [(0.2, 0.4), (0.5, 0.5), (0.9, 0.1)]:
        d = sum(wi * stats.multivariate_normal.pdf(pt, mean=mu, cov=np.diag(np.square(sd)))
                for wi, mu, sd in zip(W, MU, SD))
        print(f"gmm2d log p{pt} = {math.log(d):.12f}")

    # Symmetric cross-entropy with diagonal targets.
    S = np.array([[0.9, 0.1, -0.3], [0.2, 0.5, 0.4], [-0.1, 0.0, 0.7]])
    for ls in (0.0, math.log(1 / 0.07)):
        L = S * math.exp(ls)
        lt = L - L.max(axis=1, keepdims=True)
        lt = lt - np.log(np.exp(lt).sum(axis=1, keepdims=True))
        lp_ = L.T - L.T.max(axis=1, keepdims=True)
        lp_ = lp_ - np.log(np.exp(lp_).sum(axis=1, keepdims=True))
        loss = -0.5 * (np.mean(np.diag(lt)) + np.mean(np.diag(lp_)))
        print(f"contrastive logit_scale={ls:.6f}: {loss:.12f}")

    for tok in ("", "a", "person", "hands", "shaking"):
        print(f"fnv1a64({tok!r}) = 0x{fnv1a64(tok):016X}ULL")

    x = np.array([-3.0, -0.5, 0.0, 0.7, 2.5])
    gelu = 0.5 * x * (1 + np.tanh(math.sqrt(2 / math.pi) * (x + 0.044715 * x ** 3)))
    print("gelu:", ", ".join(f"{v:.15g}" for v in gelu))
    v = np.array([1.0, -2.0, 0.5, 4.0])
    ln = (v - v.mean()) / np.sqrt(v.var() + 1e-5)
    print("layer_norm:", ", ".join(f"{q:.15g}" for q in ln))

    # Normal-approximation interval on a fixture.
    f = np.array([1, 0, 1, 1, 0.5, 1, 0, 1, 1, 1], dtype=float)
    print(f"win fixture mean {f.mean():.12f} half {2 * f.std(ddof=1) / math.sqrt(len(f)):.12f}")
    print(f"KS 5% critical for n=10000: {stats.kstwo.ppf(0.95, 10000):.6f}")


if __name__ == "__main__":
    main()
