"""Pipeline stages and their artifact plumbing.

Every stage writes its artifacts to `<workdir>/<stage>-v<version>/` and,
once done, a marker `<workdir>/stages/<stage>.json` recording the derived
seed, the hash of the config sections it read, its artifacts and the
marker hashes of the upstream stages it consumed.
"""

import json
import shutil

from abc import (
    ABC,
    abstractmethod,
)
from collections import defaultdict
from pathlib import Path
from typing import (
    Any,
    Dict,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np

from PIL import Image
from pydantic import (
    BaseModel,
    Field,
)
from structlog.stdlib import BoundLogger

from ..cofcn_model.checkpoint import (
    load_network,
    save_network,
)
from ..cofcn_model.config import ModelKind
from ..cofcn_model.network import CoFcn
from ..core.errors import MissingArtifactError
from ..core.logging import get_logger
from ..core.model import PatchRef
from ..core.util import (
    content_hash,
    derive_seed,
    read_models,
    write_models,
)
from ..inference_eval.heatmap import (
    render_heatmap,
    save_overlay,
)
from ..inference_eval.predict import (
    predict_slide,
    read_prediction,
    write_prediction,
)
from ..inference_eval.report import (
    compare_report,
    evaluate_report,
    render_text,
    render_tsv,
)
from ..latent_space.config import (
    LatentVector,
    PcaModel,
)
from ..latent_space.embed import embed_batch
from ..latent_space.pca import (
    fit_pca,
    project,
)
from ..latent_space.train import (
    AutoencoderCheckpoint,
    train_autoencoder,
)
from ..patch_pipeline.config import (
    PatchManifest,
    PatchRecord,
    SetRole,
)
from ..patch_pipeline.manifest import (
    PatchStore,
    prepare_manifests,
    read_catalog,
    read_manifest,
    write_manifest,
)
from ..patch_pipeline.synthetic import synthesize_corpus
from ..support_selector.config import (
    ClusterModel,
    SelectorArtifact,
    SupportAssignment,
)
from ..support_selector.gmm import (
    assign_cluster,
    fit_gmm,
)
from ..support_selector.prevalence import (
    class_ratios,
    estimate_pi,
)
from ..support_selector.prototypes import (
    PrototypeCandidate,
    build_prototype_pools,
)
from ..support_selector.provider import (
    SupportProvider,
    load_artifact,
    save_artifact,
)
from ..trainer.loop import train
from .config import (
    ProjectConfig,
    section_hash,
)


__all__ = [
    "STAGE_VERSION",
    "PIPELINE",
    "STAGES",
    "StageMarker",
    "StageContext",
    "Stage",
    "run_stage",
]

STAGE_VERSION = 1
MARKER_DIR = "stages"


class StageMarker(BaseModel):
    """Provenance record written once a stage completed"""

    stage: str
    version: int = STAGE_VERSION
    seed: int = Field(..., description="The stage seed derived from the global seed")
    config_hash: str = Field(..., description="Hash of the config sections read")
    artifacts: List[str] = Field([], description="Artifacts relative to the workdir")
    upstream: Dict[str, str] = Field(
        {},
        description="Marker hashes of the consumed upstream stages",
    )


class StageContext:
    """Shared state and artifact accessors of one pipeline run"""

    def __init__(
        self,
        config: ProjectConfig,
        options: Optional[Mapping[str, Any]] = None,
        log: BoundLogger = None,
    ):
        self.config = config
        self.options: Dict[str, Any] = dict(options or {})
        self.log = log or get_logger()
        self.workdir = config.paths.workdir
        self.store = PatchStore()
        self._latents: Optional[Dict[PatchRef, List[float]]] = None

    def stage_dir(self, stage: str) -> Path:
        return self.workdir / f"{stage}-v{STAGE_VERSION}"

    def marker_path(self, stage: str) -> Path:
        return self.workdir / MARKER_DIR / f"{stage}.json"

    @property
    def slides_dir(self) -> Path:
        return self.config.paths.slides or self.stage_dir("synthesize")

    def manifest(self, role: SetRole) -> PatchManifest:
        return read_manifest(self.stage_dir("prepare") / f"{role.value}.jsonl")

    def records(
        self,
        role: SetRole,
        centers: Optional[Sequence[int]] = None,
    ) -> List[PatchRecord]:
        records = self.manifest(role).records
        if centers is not None:
            records = [r for r in records if r.center_id in centers]
        return records

    def latents(self) -> Dict[PatchRef, List[float]]:
        if self._latents is None:
            path = self.stage_dir("embed") / "latents.jsonl"
            if not path.exists():
                raise MissingArtifactError(
                    f"Latents {path} do not exist", stage="embed"
                )
            self._latents = {
                v.patch_ref: v.values for v in read_models(path, LatentVector)
            }
        return self._latents

    def center_file(self, stage: str, center_id: int, suffix: str = "json") -> Path:
        return self.stage_dir(stage) / f"center-{center_id}.{suffix}"

    def pca(self, center_id: int) -> PcaModel:
        path = self.center_file("fit-pca", center_id)
        if not path.exists():
            raise MissingArtifactError(f"PCA model {path} does not exist", "fit-pca")
        return PcaModel.parse_file(path)

    def cluster(self, center_id: int) -> ClusterModel:
        path = self.center_file("cluster", center_id)
        if not path.exists():
            raise MissingArtifactError(
                f"Cluster model {path} does not exist", "cluster"
            )
        return ClusterModel.parse_file(path)

    def provider(self) -> SupportProvider:
        artifacts = {
            c: load_artifact(self.center_file("prototypes", c))
            for c in self.config.centers.all_centers
            if self.center_file("prototypes", c).exists()
        }
        return SupportProvider(
            artifacts,
            self.records(SetRole.SUPPORT),
            self.store,
            latents=self.latents(),
            log=self.log,
        )

    def support_centers(self) -> List[int]:
        """Centers that have support patches"""
        present = {r.center_id for r in self.records(SetRole.SUPPORT)}
        return [c for c in self.config.centers.all_centers if c in present]


class Stage(ABC):
    """A named pipeline step with its upstream dependencies"""

    requires: Tuple[str, ...] = ()
    """Stages whose markers must exist before this stage may run"""

    sections: Tuple[str, ...] = ()
    """The config sections the stage reads"""

    @property
    @abstractmethod
    def name(self) -> str:
        ...

    @abstractmethod
    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        """Runs the stage and returns the written artifacts"""


class SynthesizeStage(Stage):
    sections = ("synthetic", "centers")

    @property
    def name(self) -> str:
        return "synthesize"

    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        centers = ctx.config.centers
        slides = synthesize_corpus(
            ctx.config.synthetic, centers.train, centers.test, out_dir, seed, ctx.log
        )
        artifacts = [out_dir / "slides.jsonl"]
        for slide in slides:
            artifacts.append(Path(slide.image_path))
            if slide.mask_path is not None:
                artifacts.append(Path(slide.mask_path))
        return artifacts


class PrepareStage(Stage):
    sections = ("pipeline", "paths")

    @property
    def name(self) -> str:
        return "prepare"

    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        slides = read_catalog(ctx.slides_dir)
        config = ctx.config.pipeline.copy(update={"seed": seed})
        manifests = prepare_manifests(slides, config, ctx.store, ctx.log)
        artifacts = []
        for role, manifest in manifests.items():
            path = out_dir / f"{role.value}.jsonl"
            write_manifest(path, manifest)
            artifacts.append(path)
        return artifacts


class TrainAutoencoderStage(Stage):
    requires = ("prepare",)
    sections = ("autoencoder", "centers")

    @property
    def name(self) -> str:
        return "train-ae"

    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        config = ctx.config.autoencoder.copy(update={"seed": seed})
        artifacts = []
        for center in ctx.support_centers():
            records = ctx.records(SetRole.SUPPORT, [center])
            checkpoint = train_autoencoder(records, ctx.store, config, center, ctx.log)
            path = ctx.center_file(self.name, center, "pt")
            checkpoint.save(path)
            artifacts.append(path)
        return artifacts


class EmbedStage(Stage):
    requires = ("train-ae",)
    sections = ("centers",)

    @property
    def name(self) -> str:
        return "embed"

    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        by_center: Dict[int, List[PatchRecord]] = defaultdict(list)
        for role in SetRole:
            for record in ctx.records(role):
                by_center[record.center_id].append(record)

        vectors: List[LatentVector] = []
        for center in sorted(by_center):
            checkpoint = AutoencoderCheckpoint.load(
                ctx.center_file("train-ae", center, "pt")
            )
            records = sorted(by_center[center], key=lambda r: r.ref)
            vectors.extend(
                embed_batch(
                    [ctx.store.patch_chw(r) for r in records],
                    checkpoint,
                    center,
                    [r.ref for r in records],
                )
            )
            ctx.log.info("Embedded patches", center_id=center, n_patches=len(records))

        path = out_dir / "latents.jsonl"
        write_models(path, sorted(vectors, key=lambda v: v.patch_ref))
        return [path]


class FitPcaStage(Stage):
    requires = ("embed",)
    sections = ("selector",)

    @property
    def name(self) -> str:
        return "fit-pca"

    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        latents = ctx.latents()
        artifacts = []
        for center in ctx.support_centers():
            records = ctx.records(SetRole.SUPPORT, [center])
            model = fit_pca(
                [latents[r.ref] for r in records], ctx.config.selector.pca_dims
            )
            ctx.log.info(
                "Fitted PCA",
                center_id=center,
                explained_variance=model.explained_variance,
            )
            path = ctx.center_file(self.name, center)
            path.write_text(model.json(), encoding="utf-8")
            artifacts.append(path)
        return artifacts


def _support_points(
    ctx: StageContext,
    center: int,
    pca: PcaModel,
) -> Tuple[List[PatchRecord], List[np.ndarray]]:
    latents = ctx.latents()
    records = sorted(ctx.records(SetRole.SUPPORT, [center]), key=lambda r: r.ref)
    return records, [project(latents[r.ref], pca) for r in records]


class ClusterStage(Stage):
    """Fits the GMM and the lesion prevalence of every center.

    Options:
        centers: Cluster only these centers
    """

    requires = ("embed", "fit-pca")
    sections = ("selector",)

    @property
    def name(self) -> str:
        return "cluster"

    def _centers(self, ctx: StageContext) -> List[int]:
        centers = ctx.support_centers()
        only = ctx.options.get("centers")
        if not only:
            return centers
        missing = sorted(set(only) - set(centers))
        if missing:
            raise ValueError(f"Centers {missing} have no support patches")
        return [c for c in centers if c in only]

    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        cfg = ctx.config.selector
        artifacts = []
        for center in self._centers(ctx):
            records, points = _support_points(ctx, center, ctx.pca(center))
            model = fit_gmm(
                points,
                n_components=cfg.n_components,
                seed=seed,
                center_id=center,
                tol=cfg.tol,
                max_iter=cfg.max_iter,
                reg_covar=cfg.reg_covar,
                log=ctx.log,
            )
            cluster_ids = [assign_cluster(z, model) for z in points]
            r_pos, r_neg = class_ratios(
                cluster_ids, [r.label for r in records], cfg.n_components
            )
            pi_l = estimate_pi(r_pos, r_neg)
            ctx.log.info(
                "Estimated lesion prevalence", center_id=center, pi_l=pi_l.tolist()
            )
            model = ClusterModel.parse_obj({**model.dict(), "pi_l": pi_l.tolist()})

            path = ctx.center_file(self.name, center)
            path.write_text(model.json(), encoding="utf-8")
            artifacts.append(path)
        return artifacts


class PrototypesStage(Stage):
    requires = ("cluster",)
    sections = ("selector",)

    @property
    def name(self) -> str:
        return "prototypes"

    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        cfg = ctx.config.selector
        artifacts = []
        for center in ctx.support_centers():
            pca = ctx.pca(center)
            cluster = ctx.cluster(center)
            records, points = _support_points(ctx, center, pca)
            candidates = [
                PrototypeCandidate(
                    patch_ref=record.ref,
                    cluster_id=assign_cluster(z, cluster),
                    label=record.label,
                    pca_vector=tuple(float(x) for x in z),
                )
                for record, z in zip(records, points)
            ]
            pools = build_prototype_pools(
                candidates,
                center,
                cfg.n_components,
                microcluster_dim=cfg.microcluster_dim,
                seed=seed,
            )
            path = ctx.center_file(self.name, center)
            save_artifact(
                path,
                SelectorArtifact(
                    center_id=center, pca=pca, cluster=cluster, pools=pools
                ),
            )
            artifacts.append(path)
        return artifacts


class SelectStage(Stage):
    requires = ("embed", "prototypes")
    sections = ("shots", "centers")

    @property
    def name(self) -> str:
        return "select"

    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        provider = ctx.provider()
        queries = sorted(
            ctx.records(SetRole.QUERY, ctx.config.centers.train), key=lambda r: r.ref
        )
        artifacts = []
        for k in ctx.config.shots:
            path = out_dir / f"k{k}.jsonl"
            write_models(path, [provider.assign_record(r, k) for r in queries])
            artifacts.append(path)
        return artifacts


def _training_log(result) -> Dict[str, Any]:
    return {
        "best_epoch": result.best_epoch,
        "history": [json.loads(m.json()) for m in result.history],
    }


class TrainCoFcnStage(Stage):
    requires = ("select",)
    sections = ("model", "train", "shots", "centers")

    @property
    def name(self) -> str:
        return "train-cofcn"

    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        provider = ctx.provider()
        queries = ctx.records(SetRole.QUERY, ctx.config.centers.train)
        artifacts = []
        for k in ctx.config.shots:
            assignments = {
                a.query_ref: a
                for a in read_models(
                    ctx.stage_dir("select") / f"k{k}.jsonl", SupportAssignment
                )
            }
            result = train(
                ModelKind.COFCN,
                queries,
                ctx.store,
                ctx.config.train.copy(update={"k_shots": k, "seed": seed}),
                architecture=ctx.config.model,
                assignments=assignments,
                support_tensor=provider.support_tensor,
                log=ctx.log,
            )
            path = out_dir / f"cofcn-k{k}.pt"
            save_network(path, result.model, {"k": k, **_training_log(result)})
            artifacts.append(path)
        return artifacts


class TrainUNetStage(Stage):
    requires = ("prepare",)
    sections = ("model", "train", "centers")

    @property
    def name(self) -> str:
        return "train-unet"

    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        train_centers = ctx.config.centers.train
        records = ctx.records(SetRole.SUPPORT, train_centers) + ctx.records(
            SetRole.QUERY, train_centers
        )
        result = train(
            ModelKind.UNET,
            records,
            ctx.store,
            ctx.config.train.copy(update={"seed": seed}),
            architecture=ctx.config.model,
            log=ctx.log,
        )
        path = out_dir / "unet.pt"
        save_network(path, result.model, _training_log(result))
        return [path]


class InferStage(Stage):
    """Scores the test slides with every trained network.

    Options:
        model: Score only this network checkpoint
        k: Restrict the co-FCNs to this shot count
    """

    requires = ("embed", "prototypes", "train-cofcn", "train-unet")
    sections = ("evaluation", "shots", "centers")

    @property
    def name(self) -> str:
        return "infer"

    def _checkpoints(self, ctx: StageContext) -> List[Path]:
        if ctx.options.get("model") is not None:
            return [Path(ctx.options["model"])]
        shots = ctx.config.shots
        if ctx.options.get("k") is not None:
            shots = [ctx.options["k"]]
        return [ctx.stage_dir("train-unet") / "unet.pt"] + [
            ctx.stage_dir("train-cofcn") / f"cofcn-k{k}.pt" for k in shots
        ]

    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        by_slide: Dict[str, List[PatchRecord]] = defaultdict(list)
        for record in ctx.records(SetRole.TEST, ctx.config.centers.test):
            by_slide[record.slide_id].append(record)

        cfg = ctx.config.evaluation
        provider = ctx.provider()
        artifacts = []
        for checkpoint in self._checkpoints(ctx):
            model, _ = load_network(checkpoint)
            conditioned = isinstance(model, CoFcn)
            for slide_id in sorted(by_slide):
                prediction = predict_slide(
                    model,
                    by_slide[slide_id],
                    ctx.store,
                    provider=provider if conditioned else None,
                    k=ctx.options.get("k") if conditioned else None,
                    aggregation=cfg.aggregation,
                    batch_size=cfg.batch_size,
                    log=ctx.log,
                )
                artifacts.extend(
                    write_prediction(out_dir / prediction.model_name, prediction)
                )
        return artifacts


def _read_predictions(ctx: StageContext):
    return [
        read_prediction(path)
        for path in sorted(ctx.stage_dir("infer").glob("*/*.jsonl"))
    ]


def _write_report(out_dir: Path, rows) -> List[Path]:
    text_path = out_dir / "report.txt"
    tsv_path = out_dir / "report.tsv"
    text_path.write_text(render_text(rows), encoding="utf-8")
    tsv_path.write_text(render_tsv(rows), encoding="utf-8")
    return [text_path, tsv_path]


class EvaluateStage(Stage):
    requires = ("infer",)
    sections = ("evaluation",)

    @property
    def name(self) -> str:
        return "evaluate"

    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        rows = evaluate_report(_read_predictions(ctx), ctx.config.evaluation, ctx.log)
        return _write_report(out_dir, rows)


class CompareStage(Stage):
    requires = ("infer",)
    sections = ("evaluation",)

    @property
    def name(self) -> str:
        return "compare"

    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        unet: Dict[str, Any] = {}
        cofcn: Dict[int, Dict[str, Any]] = defaultdict(dict)
        for prediction in _read_predictions(ctx):
            if prediction.model_name == "unet":
                unet[prediction.slide_id] = prediction
            else:
                k = int(prediction.model_name.rsplit("-k", 1)[1])
                cofcn[k][prediction.slide_id] = prediction
        slides = sorted(set(unet).union(*(set(p) for p in cofcn.values())))
        rows = compare_report(cofcn, unet, slides, ctx.log)
        return _write_report(out_dir, rows)


class RenderStage(Stage):
    """Writes heatmap overlays of every prediction.

    Options:
        threshold: Overrides the configured heatmap threshold
    """

    requires = ("infer",)
    sections = ("evaluation",)

    @property
    def name(self) -> str:
        return "render"

    def run(self, ctx: StageContext, out_dir: Path, seed: int) -> List[Path]:
        cfg = ctx.config.evaluation
        threshold = ctx.options.get("threshold")
        threshold = cfg.heatmap_threshold if threshold is None else threshold
        images = {s.slide_id: s.image_path for s in read_catalog(ctx.slides_dir)}

        artifacts = []
        for prediction in _read_predictions(ctx):
            with Image.open(images[prediction.slide_id]) as image:
                background = np.asarray(image.convert("RGB"))
            overlay = render_heatmap(
                prediction, background, threshold, cfg.overlay_opacity
            )
            stem = prediction.slide_id.replace("/", "_")
            path = out_dir / prediction.model_name / f"{stem}.png"
            save_overlay(path, overlay)
            artifacts.append(path)
        return artifacts


PIPELINE: Tuple[Stage, ...] = (
    SynthesizeStage(),
    PrepareStage(),
    TrainAutoencoderStage(),
    EmbedStage(),
    FitPcaStage(),
    ClusterStage(),
    PrototypesStage(),
    SelectStage(),
    TrainCoFcnStage(),
    TrainUNetStage(),
    InferStage(),
    EvaluateStage(),
    CompareStage(),
    RenderStage(),
)

STAGES: Dict[str, Stage] = {stage.name: stage for stage in PIPELINE}


def _relative(path: Path, workdir: Path) -> str:
    try:
        return path.relative_to(workdir).as_posix()
    except ValueError:
        return path.as_posix()


def _marker_hash(ctx: StageContext, stage: str) -> str:
    path = ctx.marker_path(stage)
    if not path.exists():
        raise MissingArtifactError(
            f"Stage {stage} has not completed: run {stage} first", stage=stage
        )
    return content_hash(json.loads(path.read_text(encoding="utf-8")))


def run_stage(
    name: str,
    config: ProjectConfig,
    options: Optional[Mapping[str, Any]] = None,
    log: BoundLogger = None,
) -> List[StageMarker]:
    """Runs a stage (or `all` stages in order) and writes its marker.

    Args:
        name: The stage name or `all`
        config: The project configuration
        options: Stage specific options (`model`, `k`, `threshold`)
        log: The logger to use

    Raises:
        KeyError: If the stage does not exist
        MissingArtifactError: If an upstream stage has not completed

    Returns:
        The markers of the stages that ran
    """
    log = log or get_logger()
    if name == "all":
        markers: List[StageMarker] = []
        for stage in PIPELINE:
            markers.extend(run_stage(stage.name, config, options, log))
        return markers
    if name not in STAGES:
        raise KeyError(f"Unknown stage {name}, expected one of {sorted(STAGES)}")

    stage = STAGES[name]
    seed = derive_seed(config.seed, name)
    config_hash = section_hash(config, stage.sections + ("seed",))
    stage_log = log.bind(stage=name)
    ctx = StageContext(config, options, stage_log)
    upstream = {req: _marker_hash(ctx, req) for req in stage.requires}

    stage_log.info("Starting stage", seed=seed, config_hash=config_hash)
    out_dir = ctx.stage_dir(name)
    if out_dir.exists():
        shutil.rmtree(out_dir)
    out_dir.mkdir(parents=True)
    artifacts = stage.run(ctx, out_dir, seed)

    marker = StageMarker(
        stage=name,
        seed=seed,
        config_hash=config_hash,
        artifacts=[_relative(path, ctx.workdir) for path in artifacts],
        upstream=upstream,
    )
    marker_path = ctx.marker_path(name)
    marker_path.parent.mkdir(parents=True, exist_ok=True)
    marker_path.write_text(marker.json(indent=2), encoding="utf-8")
    stage_log.info("Finished stage", artifacts=marker.artifacts)
    return [marker]
