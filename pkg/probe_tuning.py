"""Scratch probe: criteria margins across synthgen configs and seeds."""
import numpy as np
import tins
from tins.cli import execute_sweep, SweepSpec
from tins.tracking import resolve_queries


def check(seed, dimension, **kw):
    cfg = tins.SynthConfig(seed=seed, dimension=dimension, **kw)
    res = tins.generate(cfg)
    idx = tins.build(res.dataset, tins.IndexConfig(num_clusters=64, nprobe=8,
                                                   num_subspaces=8, seed=0))
    queries = resolve_queries(res.dataset, res.queries)
    rows, _ = execute_sweep(res.dataset, idx, queries, res.truth, SweepSpec(),
                            top_n=300, nprobe=8, cutoff=300)
    m = {(r['w'], r['r'], r['k'], r['voting']): r['map'] for r in rows}
    base = m[(0, 1, 1, 'vosc1')]
    tr = m[(5, 2, 1, 'vosc1')]
    k2 = m[(0, 1, 2, 'vosc1')]
    k4 = m[(0, 1, 4, 'vosc1')]
    grid = [(w, r) for w in (1, 2, 3, 4, 5) for r in (1, 2, 5)]
    c5k = {k: np.mean([m[(w, r, k, 'vosc1')] for w, r in grid])
              - np.mean([m[(w, r, k, 'vosc2')] for w, r in grid])
           for k in (1, 2, 4)}
    r5 = m[(5, 5, 1, 'vosc1')]
    r20 = m[(5, 20, 1, 'vosc1')]
    c3 = tr - base >= 0.02
    c4 = k4 > k2 > base
    c5 = (c5k[1] + c5k[4]) / 2 >= 0
    c6 = r5 >= r20
    flags = ''.join('.' if ok else 'X' for ok in (c3, c4, c5, c6))
    print(f'  seed={seed:>4} [{flags}] base={base:.3f} gain={tr-base:+.3f} '
          f'K={base:.3f}/{k2:.3f}/{k4:.3f} c5k1={c5k[1]:+.4f} c5k2={c5k[2]:+.4f} '
          f'c5k4={c5k[4]:+.4f} r5-r20={r5-r20:+.3f}')
    return all((c3, c4, c5, c6))


if __name__ == '__main__':
    import warnings
    warnings.filterwarnings('ignore')
    configs = {
        'E D16 id.05 s.05': dict(dimension=16, identity_noise=0.05, drift_per_frame=0.05),
        'F D16 id.03 s.06': dict(dimension=16, identity_noise=0.03, drift_per_frame=0.06),
        'G D24 id.03 s.06': dict(dimension=24, identity_noise=0.03, drift_per_frame=0.06),
        'H D16 id.02 s.07': dict(dimension=16, identity_noise=0.02, drift_per_frame=0.07),
    }
    seeds = [42, 7, 123, 2024]
    for name, kw in configs.items():
        print(name)
        wins = sum(check(s, **kw) for s in seeds)
        print(f'  -> {wins}/{len(seeds)} seeds pass')
