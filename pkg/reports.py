"""Artifact emission: JSON report, sweep curve, posterior weights and histograms."""
import logging
import os

import helpers
from helpers import ensure_dir, format_threshold_tag, read_json
from models import RunReport

logger = logging.getLogger(__name__)

SWEEP_HEADER = ["threshold_snu", "success_probability", "gaussian_ln", "weight_entropy"]
WEIGHTS_HEADER = ["threshold_snu", "level", "transmittance", "prior_weight", "posterior_weight"]
HISTOGRAM_HEADER = ["bin_left", "bin_right", "count", "series", "selection"]
MC_HEADER = ["threshold_snu", "kept_count", "total_count", "success_probability_hat",
             "success_probability_stderr", "gaussian_ln_hat", "gaussian_ln_stderr"]


def _histogram_rows(histograms):
    edges = histograms["bin_edges"]
    for selection in ("pre", "post"):
        for series, counts in histograms[selection].items():
            for k, count in enumerate(counts):
                yield [float(edges[k]), float(edges[k + 1]), int(count), series, selection]


def emit_artifacts(report, out_dir, write_json=True, write_csv=True, histograms=None):
    """Write the report and its plot-ready data files; returns the written paths.

    ``histograms`` maps threshold -> histogram section; by default they are
    taken from the Monte Carlo section of each report row.
    """
    ensure_dir(out_dir)
    paths = []
    if histograms is None:
        histograms = {row.threshold: row.mc["histograms"]
                      for row in report.rows if row.mc and "histograms" in row.mc}

    if write_json:
        paths.append(helpers.write_json(os.path.join(out_dir, "report.json"), report.to_dict()))
        if "config" in report.provenance:
            paths.append(helpers.write_json(os.path.join(out_dir, "config.json"), report.provenance["config"]))

    if write_csv:
        ok_rows = [row for row in report.rows if row.ok]
        paths.append(helpers.write_csv(
            os.path.join(out_dir, "sweep.csv"), SWEEP_HEADER,
            [[row.threshold, row.success_probability, row.ln, row.weight_entropy] for row in ok_rows]))
        paths.append(helpers.write_csv(
            os.path.join(out_dir, "weights.csv"), WEIGHTS_HEADER,
            [[row.threshold, w["level"], w["transmittance"], w["prior_weight"], w["posterior_weight"]]
             for row in ok_rows for w in row.posterior_weights]))

        mc_rows = [row for row in report.rows if row.mc and "ln_hat" in row.mc]
        if mc_rows:
            paths.append(helpers.write_csv(
                os.path.join(out_dir, "mc.csv"), MC_HEADER,
                [[row.threshold, row.mc["kept_count"], row.mc["total_count"],
                  row.mc["success_probability_hat"], row.mc["success_probability_stderr"],
                  row.mc["ln_hat"], row.mc["ln_stderr"]] for row in mc_rows]))
        for threshold, section in histograms.items():
            name = f"histograms_{format_threshold_tag(threshold)}.csv"
            paths.append(helpers.write_csv(os.path.join(out_dir, name), HISTOGRAM_HEADER, _histogram_rows(section)))

    logger.info("wrote %d artifacts to %s", len(paths), out_dir)
    return paths


def load_report(path):
    return RunReport.from_dict(read_json(path))


def render_report(report_path, out_dir, write_json=True, write_csv=True):
    """Re-emit every artifact from a stored report.json."""
    report = load_report(report_path)
    return emit_artifacts(report, out_dir, write_json=write_json, write_csv=write_csv)
