"""One detector, many parameters.

The same scan monitors whichever functional you declare: variance,
autocorrelation, correlation, covariance matrix, a quantile, or several at
once.  Each example below uses a benchmark generator whose true break is in
that parameter, and the threshold adapts only through the functional's
output dimension.

    python demos/02_functionals_tour.py
"""

import sncp

table = sncp.builtin_table()


def show(title, preset_name, functional, seed=1):
    preset = sncp.get_preset(preset_name)
    series, truth = sncp.generate(preset, seed)
    d = functional.output_dim(series.p)
    threshold = sncp.lookup(table, 0.05, d, 0.90)
    config = sncp.DetectionConfig(functional=functional, threshold=threshold)
    result = sncp.detect(series, config)
    print(f"{title:<38} truth {str(truth.points):<12} -> {result.changepoints.points}"
          f"   (d={d}, K={threshold})")


print("parameter being monitored               truth        detected")
show("variance (v1: AR noise, sd 1->2->1)", "v1", sncp.FunctionalSpec.variance())
show("autocorrelation (a1: AR coef shifts)", "a1", sncp.FunctionalSpec.autocorrelation(1, 1))
show("correlation (r1: 0.8 -> 0.2 -> 0.8)", "r1", sncp.FunctionalSpec.correlation(1, 2))
show("covariance matrix (c1: factor scale)", "c1", sncp.FunctionalSpec.covariance_matrix())
show("90% quantile (mp1: heavy upper tail)", "mp1", sncp.FunctionalSpec.quantile(0.9))
show(
    "variance + 90% quantile jointly (mp1)", "mp1",
    sncp.FunctionalSpec.multi([sncp.FunctionalSpec.variance(), sncp.FunctionalSpec.quantile(0.9)]),
)

# the textual encoding used by the CLI round-trips every spec
spec = sncp.FunctionalSpec.multi(
    [sncp.FunctionalSpec.variance(), sncp.FunctionalSpec.quantile(0.9)]
)
print(f"\nCLI encoding of the last functional: {spec.encode()!r}")
print(f"parsed back: {sncp.parse_functional(spec.encode()) == spec}")
