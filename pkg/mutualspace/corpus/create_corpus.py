"""Write the authored corpus to disk, optionally with seeded furniture jitter."""

import logging
import pathlib
from typing import List

import numpy as np
import tqdm

from mutualspace.corpus.layouts import HOMES, HOSTS, OFFICES
from mutualspace.floorplan import FloorplanModel, RegionModel, dumps, from_model
from mutualspace.misc import CorpusError, FloorplanValidationError, GeometryError, G

logger = logging.getLogger(__name__)

JITTER = 0.1  # m
MOVABLE_LABELS = ("chair", "obstacle")


def _shifted(region: RegionModel, dx: float, dy: float) -> RegionModel:
    return region.model_copy(update={"polygon": [(round(x + dx, 4), round(y + dy, 4)) for x, y in region.polygon]})


def jitter(model: FloorplanModel, rng: np.random.Generator) -> FloorplanModel:
    """Move chairs and obstacles by up to JITTER in x and y; a piece that would break validation stays put."""
    regions = list(model.regions)
    for i, region in enumerate(regions):
        if region.label not in MOVABLE_LABELS:
            continue
        dx, dy = rng.uniform(-JITTER, JITTER, size=2)
        trial = regions[:i] + [_shifted(region, float(dx), float(dy))] + regions[i + 1 :]
        try:
            from_model(model.model_copy(update={"regions": trial}))
        except (FloorplanValidationError, GeometryError):
            continue
        regions = trial
    return model.model_copy(update={"regions": regions})


def corpus_models(seed: int = 0) -> List[FloorplanModel]:
    """All fourteen plans. Seed 0 is the authored layout."""
    models = HOSTS + HOMES + OFFICES
    if seed == 0:
        return list(models)
    rng = np.random.default_rng(seed)
    return [jitter(m, rng) for m in models]


def write_corpus(out_dir: pathlib.Path, seed: int = 0) -> List[pathlib.Path]:
    """Validate and write every plan as <id>.json."""
    out_dir = pathlib.Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CorpusError(f"cannot create {out_dir}: {exc}") from exc
    written: List[pathlib.Path] = []
    for model in tqdm.tqdm(corpus_models(seed), desc="Writing floorplans"):
        fp = from_model(model)
        path = out_dir / f"{fp.id}.json"
        try:
            path.write_text(dumps(fp), encoding="utf-8")
        except OSError as exc:
            raise CorpusError(f"cannot write {path}: {exc}") from exc
        written.append(path)
    logger.info("%sWrote %s floorplans to %s", G, len(written), out_dir.resolve())
    return written
