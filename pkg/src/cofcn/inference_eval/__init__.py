"""Slide inference, ROC statistics, reports and heatmaps."""

from .config import (
    Aggregation,
    DelongTestResult,
    EvaluationConfig,
    PatchPrediction,
    RocResult,
    SlidePrediction,
)
from .heatmap import (
    heatmap_layer,
    probability_colors,
    render_heatmap,
    save_overlay,
)
from .predict import (
    aggregate_central,
    model_name,
    predict_slide,
    read_prediction,
    write_prediction,
)
from .report import (
    ComparisonRow,
    EvaluationRow,
    compare_report,
    evaluate_report,
    format_percent,
    percent_difference,
    render_text,
    render_tsv,
)
from .roc import (
    delong_ci,
    delong_covariance,
    delong_test,
    pauc,
    pauc_mcclish,
    roc_auc,
    roc_curve,
    sig_code,
)


__all__ = [
    "Aggregation",
    "ComparisonRow",
    "DelongTestResult",
    "EvaluationConfig",
    "EvaluationRow",
    "PatchPrediction",
    "RocResult",
    "SlidePrediction",
    "aggregate_central",
    "compare_report",
    "delong_ci",
    "delong_covariance",
    "delong_test",
    "evaluate_report",
    "format_percent",
    "heatmap_layer",
    "model_name",
    "pauc",
    "pauc_mcclish",
    "percent_difference",
    "predict_slide",
    "probability_colors",
    "read_prediction",
    "render_heatmap",
    "render_tsv",
    "render_text",
    "roc_auc",
    "roc_curve",
    "save_overlay",
    "sig_code",
    "write_prediction",
]
