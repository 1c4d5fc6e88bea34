"""Recompute the comparison ratios and signed-rank p-values from the shipped reference tables."""

from uasplan.bench import load_reference_records, summarize


def main():
    report = summarize(load_reference_records())
    for c in report.comparisons:
        print(f"{c.name:28s} n={c.n_pairs:2d}  time a/b {c.mean_time_ratio:7.2f}  "
              f"length a/b {c.mean_length_ratio:.4f}  p(time) {c.time_test['p']:.6f}")


if __name__ == "__main__":
    main()
