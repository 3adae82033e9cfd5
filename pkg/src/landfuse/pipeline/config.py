"""Run configuration: one declarative YAML file, validated on load.

Every tuning constant (tolerances, balancing, learner grids, synthetic-scene
parameters) lives here so a run is fully described by (config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from landfuse.learners import LearnerSpec
from landfuse.resampling import BalancingPlan


class PipelineError(RuntimeError):
    """A stage-tagged failure; the CLI prints it and exits nonzero."""

    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage

    def __str__(self) -> str:
        return f"[{self.stage}] {super().__str__()}"


@dataclass(frozen=True)
class LayerConfig:
    name: str
    kind: str
    path: str | None = None
    categories: tuple[str, ...] = ()
    bands: dict[str, str] = field(default_factory=dict)  # band -> grid file
    manifest: str | None = None                          # table layers only
    nodata: float = -9999.0


@dataclass(frozen=True)
class DatasetConfig:
    polygons: str
    layers: tuple[LayerConfig, ...]


@dataclass(frozen=True)
class SynthSourceConfig:
    name: str
    fidelity: float = 1.0
    mode: str = "informative"  # informative | noise


@dataclass(frozen=True)
class SynthRasterConfig:
    name: str = "imagery"
    band: str = "b1"
    correlated_class: str = ""
    cells_per_polygon: int = 2
    signal: float = 10.0


@dataclass(frozen=True)
class SynthConfig:
    n_polygons: int = 1000
    cell_size: float = 100.0
    priors: dict[str, float] = field(default_factory=dict)
    sources: tuple[SynthSourceConfig, ...] = ()
    raster: SynthRasterConfig | None = None
    jitter: float = 0.3


@dataclass
class RunConfig:
    frame: tuple[str, ...]
    seed: int = 0
    output_dir: str = "out"
    split_fraction: float = 0.8
    split_stratified: bool = False
    balancing: BalancingPlan = field(default_factory=BalancingPlan)
    all_source: LearnerSpec = field(
        default_factory=lambda: LearnerSpec("gradient-boosted-trees"))
    per_source: LearnerSpec = field(
        default_factory=lambda: LearnerSpec("gradient-boosted-trees"))
    dataset: DatasetConfig | None = None
    synth: SynthConfig | None = None
    area_tol: float = 1e-9
    length_tol: float = 1e-6
    ablation_reuse_hyperparams: bool = True
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self) -> None:
        if len(self.frame) < 2 or len(set(self.frame)) != len(self.frame):
            raise PipelineError("config", "frame needs >= 2 distinct classes")
        if not 0.0 < self.split_fraction < 1.0:
            raise PipelineError("config", "split fraction must be in (0, 1)")

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def _learner_spec(doc: dict, seed: int) -> LearnerSpec:
    return LearnerSpec(
        family=doc.get("family", "gradient-boosted-trees"),
        hyperparams=dict(doc.get("hyperparams", {})),
        grid={k: list(v) for k, v in doc.get("grid", {}).items()},
        cv_folds=int(doc.get("cv_folds", 5)),
        seed=seed,
    )


def config_from_dict(doc: dict, base_dir: Path = Path(".")) -> RunConfig:
    try:
        frame = tuple(doc["frame"])
    except KeyError as exc:
        raise PipelineError("config", "missing required key 'frame'") from exc
    seed = int(doc.get("seed", 0))
    split = doc.get("split", {})
    balancing_doc = doc.get("balancing", {})
    balancing = BalancingPlan(
        strategy=balancing_doc.get("strategy", "none"),
        target={k: int(v) for k, v in balancing_doc["target"].items()}
        if "target" in balancing_doc else None,
        k_neighbors=int(balancing_doc.get("k_neighbors", 5)),
        seed=seed,
    )
    learners_doc = doc.get("learners", {})

    dataset = None
    if "dataset" in doc:
        ds = doc["dataset"]
        layers = []
        for layer in ds.get("layers", []):
            layers.append(LayerConfig(
                name=layer["name"],
                kind=layer["kind"],
                path=layer.get("path"),
                categories=tuple(layer.get("categories", ())),
                bands=dict(layer.get("bands", {})),
                manifest=layer.get("manifest"),
                nodata=float(layer.get("nodata", -9999.0)),
            ))
        dataset = DatasetConfig(polygons=ds["polygons"], layers=tuple(layers))

    synth = None
    if "synth" in doc:
        sy = doc["synth"]
        sources = tuple(
            SynthSourceConfig(
                name=s["name"],
                fidelity=float(s.get("fidelity", 1.0)),
                mode=s.get("mode", "informative"),
            )
            for s in sy.get("sources", ()))
        raster = None
        if "raster" in sy:
            ra = sy["raster"]
            raster = SynthRasterConfig(
                name=ra.get("name", "imagery"),
                band=ra.get("band", "b1"),
                correlated_class=ra.get("correlated_class", frame[0]),
                cells_per_polygon=int(ra.get("cells_per_polygon", 2)),
                signal=float(ra.get("signal", 10.0)),
            )
        priors = {k: float(v) for k, v in sy.get("priors", {}).items()}
        synth = SynthConfig(
            n_polygons=int(sy.get("n_polygons", 1000)),
            cell_size=float(sy.get("cell_size", 100.0)),
            priors=priors,
            sources=sources,
            raster=raster,
            jitter=float(sy.get("jitter", 0.3)),
        )

    tol = doc.get("tolerances", {})
    return RunConfig(
        frame=frame,
        seed=seed,
        output_dir=doc.get("output_dir", "out"),
        split_fraction=float(split.get("fraction", 0.8)),
        split_stratified=bool(split.get("stratified", False)),
        balancing=balancing,
        all_source=_learner_spec(learners_doc.get("all_source", {}), seed),
        per_source=_learner_spec(learners_doc.get("per_source", {}), seed),
        dataset=dataset,
        synth=synth,
        area_tol=float(tol.get("area", 1e-9)),
        length_tol=float(tol.get("length", 1e-6)),
        ablation_reuse_hyperparams=bool(
            doc.get("ablation", {}).get("reuse_hyperparams", True)),
        base_dir=base_dir,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise PipelineError("config", f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise PipelineError("config", f"unparseable config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise PipelineError("config", f"config {path} is not a mapping")
    return config_from_dict(doc, base_dir=path.parent)


def config_to_dict(config: RunConfig) -> dict:
    """Round-trippable plain-dict form (used when a generated scene writes a
    ready-to-run config next to its dataset files)."""
    doc: dict = {
        "frame": list(config.frame),
        "seed": config.seed,
        "output_dir": config.output_dir,
        "split": {"fraction": config.split_fraction,
                  "stratified": config.split_stratified},
        "balancing": {
            "strategy": config.balancing.strategy,
            "k_neighbors": config.balancing.k_neighbors,
            **({"target": config.balancing.target}
               if config.balancing.target else {}),
        },
        "learners": {
            "all_source": {
                "family": config.all_source.family,
                "hyperparams": config.all_source.hyperparams,
                "grid": config.all_source.grid,
                "cv_folds": config.all_source.cv_folds,
            },
            "per_source": {
                "family": config.per_source.family,
                "hyperparams": config.per_source.hyperparams,
                "grid": config.per_source.grid,
                "cv_folds": config.per_source.cv_folds,
            },
        },
        "tolerances": {"area": config.area_tol, "length": config.length_tol},
        "ablation": {"reuse_hyperparams": config.ablation_reuse_hyperparams},
    }
    if config.dataset is not None:
        layers = []
        for layer in config.dataset.layers:
            entry: dict = {"name": layer.name, "kind": layer.kind}
            if layer.path:
                entry["path"] = layer.path
            if layer.categories:
                entry["categories"] = list(layer.categories)
            if layer.bands:
                entry["bands"] = dict(layer.bands)
            if layer.manifest:
                entry["manifest"] = layer.manifest
            layers.append(entry)
        doc["dataset"] = {"polygons": config.dataset.polygons, "layers": layers}
    if config.synth is not None:
        sy: dict = {
            "n_polygons": config.synth.n_polygons,
            "cell_size": config.synth.cell_size,
            "priors": config.synth.priors,
            "jitter": config.synth.jitter,
            "sources": [
                {"name": s.name, "fidelity": s.fidelity, "mode": s.mode}
                for s in config.synth.sources
            ],
        }
        if config.synth.raster is not None:
            ra = config.synth.raster
            sy["raster"] = {
                "name": ra.name, "band": ra.band,
                "correlated_class": ra.correlated_class,
                "cells_per_polygon": ra.cells_per_polygon,
                "signal": ra.signal,
            }
        doc["synth"] = sy
    return doc
