"""Floorplan corpus: host meeting rooms plus home and office client spaces."""

import logging
import pathlib
from typing import List, Optional

import pydantic

from mutualspace.floorplan import Floorplan, PlanKind, from_model, load
from mutualspace.misc import CorpusError, MutualSpaceError

logger = logging.getLogger(__name__)


class Corpus(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    hosts: List[Floorplan] = []
    homes: List[Floorplan] = []
    offices: List[Floorplan] = []

    @classmethod
    def of(cls, plans: List[Floorplan]) -> "Corpus":
        """Sort plans by kind and id. Duplicate ids are an error."""
        ids = [p.id for p in plans]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise CorpusError(f"duplicate plan ids: {', '.join(duplicates)}")

        def of_kind(kind: PlanKind) -> List[Floorplan]:
            return sorted((p for p in plans if p.kind is kind), key=lambda p: p.id)

        return cls(hosts=of_kind(PlanKind.HOST), homes=of_kind(PlanKind.HOME), offices=of_kind(PlanKind.OFFICE))

    @property
    def plans(self) -> List[Floorplan]:
        return self.hosts + self.homes + self.offices

    def plan(self, plan_id: str) -> Floorplan:
        for fp in self.plans:
            if fp.id == plan_id:
                return fp
        raise CorpusError(f"no plan {plan_id} in corpus")


def builtin_corpus(seed: int = 0) -> Corpus:
    """The authored corpus, jittered when seed is not 0."""
    from mutualspace.corpus.create_corpus import corpus_models

    return Corpus.of([from_model(m) for m in corpus_models(seed)])


def load_corpus(path: Optional[pathlib.Path] = None) -> Corpus:
    """Every *.json floorplan in a directory, or the built in corpus when no directory is given."""
    if path is None:
        return builtin_corpus()
    path = pathlib.Path(path)
    if not path.is_dir():
        raise CorpusError(f"corpus directory {path} does not exist")
    plans = []
    for file in sorted(path.glob("*.json")):
        try:
            plans.append(load(file))
        except MutualSpaceError as exc:
            raise CorpusError(f"{file.name}: {exc}") from exc
    if not plans:
        raise CorpusError(f"no floorplans in {path}")
    logger.debug("Loaded %s floorplans from %s", len(plans), path)
    return Corpus.of(plans)
