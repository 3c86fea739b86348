"""
The law store: one JSON document holding the allocation laws per sparsity, the sparsity-law parameters, the final
loss-law coefficients and any alternative-law coefficients, each tagged with its provenance. Fitting commands write
to it, evaluation commands read from it. Without a file the built-in store of published coefficients is used.
"""
import logging
import math
import os
from dataclasses import dataclass, field, replace

from moeScaling.param import SCHEMA_VERSION, sweptSparsityList
from moeScaling.errors import SchemaError
from moeScaling.schemas import LawStoreSchema
from moeScaling.alloc import AllocationLaw, SparsityLaw, PUBLISHED_SPARSITY_LAW, sparsity_coefficients
from moeScaling.scaling import LossLawCoefficients, AltLawCoefficients
from moeScaling.planner.io import write_json, read_json

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LawStore:
    allocation_laws: tuple = ()
    sparsity_law: SparsityLaw = PUBLISHED_SPARSITY_LAW
    loss_law: LossLawCoefficients = None
    alt_laws: tuple = field(default_factory=tuple)

    def allocation_law_for(self, S):
        for law in self.allocation_laws:
            if law.sparsity is not None and math.isclose(law.sparsity, S, rel_tol=0, abs_tol=1e-9):
                return law
        return None

    def alt_law(self, variant):
        return next((coef for coef in self.alt_laws if coef.variant == variant), None)

    def with_allocation_laws(self, laws):
        """Replace the laws at the sparsities in `laws`, keep the rest, order by sparsity."""
        merged = {law.sparsity: law for law in self.allocation_laws}
        for law in laws:
            merged[law.sparsity] = law
        return replace(self, allocation_laws=tuple(merged[S] for S in sorted(merged)))

    def with_sparsity_law(self, law):
        return replace(self, sparsity_law=law)

    def with_loss_coefficients(self, coef):
        if isinstance(coef, LossLawCoefficients):
            return replace(self, loss_law=coef)
        others = tuple(c for c in self.alt_laws if c.variant != coef.variant)
        return replace(self, alt_laws=others + (coef,))

    def loss_coefficients(self, variant="final"):
        return self.loss_law if variant == "final" else self.alt_law(variant)

    def to_dict(self):
        output = {
            "schema_version": SCHEMA_VERSION,
            "allocation_laws": [law.to_dict() for law in self.allocation_laws],
            "sparsity_law": self.sparsity_law.to_dict(),
        }
        if self.loss_law is not None:
            output["loss_law"] = self.loss_law.to_dict()
        if self.alt_laws:
            output["alt_laws"] = [coef.to_dict() for coef in self.alt_laws]
        return output

    @classmethod
    def from_dict(cls, payload):
        LawStoreSchema.validate(payload)
        if payload["schema_version"] != SCHEMA_VERSION:
            raise SchemaError(f"unsupported law store schema_version {payload['schema_version']}")
        loss_law = payload.get("loss_law")
        if loss_law is not None and loss_law["variant"] != "final":
            raise SchemaError("loss_law must carry variant 'final'")
        alt_laws = payload.get("alt_laws") or []
        return cls(
            allocation_laws=tuple(AllocationLaw.from_dict(law) for law in payload["allocation_laws"]),
            sparsity_law=SparsityLaw.from_dict(payload["sparsity_law"]),
            loss_law=LossLawCoefficients.from_dict(loss_law) if loss_law is not None else None,
            alt_laws=tuple(AltLawCoefficients.from_dict(coef) for coef in alt_laws),
        )


def default_law_store() -> LawStore:
    """Published coefficients: the sparsity law, its allocation laws at the four swept sparsities, and the published loss-law estimates."""
    laws = tuple(replace(sparsity_coefficients(S), provenance="paper-fit") for S in sweptSparsityList)
    return LawStore(allocation_laws=laws, sparsity_law=PUBLISHED_SPARSITY_LAW, loss_law=LossLawCoefficients.published())


def load_law_store(path=None) -> LawStore:
    if path is None:
        return default_law_store()
    store = LawStore.from_dict(read_json(path))
    logger.debug(f"[planner][load_law_store] {path}: {len(store.allocation_laws)} allocation laws, loss law {'present' if store.loss_law else 'absent'}")
    return store


def load_or_default(path=None) -> LawStore:
    """Like load_law_store, but a path that does not exist yet starts from the built-in store."""
    if path is not None and os.path.exists(path):
        return load_law_store(path)
    return default_law_store()


def save_law_store(store: LawStore, path):
    write_json(path, store.to_dict())
    logger.info(f"[planner][save_law_store] wrote {path}")
