"""
Checkpoint / resume for long verification runs.

The file is JSON: {"sha256": <hex>, "checkpoint": {...}}. The hash covers the
canonical serialization of the checkpoint body, so any edit is detected.
"""
import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Dict, List, Union

from pydantic import BaseModel, ValidationError

from src.claims.ledger import ClaimAccumulator, ClaimFold, LedgerSettings
from src.config import Config
from src.errors import CheckpointCorruptionError, CheckpointVersionError
from src.primes.gaps import KahanSum, RecordTracker

logger = logging.getLogger(__name__)


class Checkpoint(BaseModel):
    schema_version: int = Config.CHECKPOINT_SCHEMA_VERSION
    limit: int
    last_prime: int
    last_index: int
    sum_g: int
    sum_h_value: float
    sum_h_compensation: float
    record_tracker_state: RecordTracker
    claim_accumulators: Dict[str, ClaimAccumulator]
    claims: List[str]
    settings: LedgerSettings


def _canonical(body: dict) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


def _digest(body: dict) -> str:
    return hashlib.sha256(_canonical(body).encode("utf-8")).hexdigest()


def checkpoint_from_fold(fold: ClaimFold, limit: int) -> Checkpoint:
    value, compensation = fold.stats.sum_h.state()
    return Checkpoint(
        limit=limit,
        last_prime=fold.stats.last_prime,
        last_index=fold.stats.n + 1,
        sum_g=fold.stats.sum_g,
        sum_h_value=value,
        sum_h_compensation=compensation,
        record_tracker_state=fold.tracker,
        claim_accumulators={c.value: acc for c, acc in fold.accumulators.items()},
        claims=[c.value for c in fold.claims],
        settings=fold.settings,
    )


def serialize(checkpoint: Checkpoint) -> str:
    body = checkpoint.model_dump(mode="json")
    return json.dumps({"sha256": _digest(body), "checkpoint": body}, sort_keys=True, indent=2) + "\n"


def write_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
    """Write atomically: temp file in the same directory, then rename"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(serialize(checkpoint))
    os.replace(tmp, path)
    logger.info("checkpoint written to %s at n=%d", path, checkpoint.last_index - 1)
    return path


def checkpoint_write(fold: ClaimFold, limit: int, path: Union[str, Path]) -> Checkpoint:
    checkpoint = checkpoint_from_fold(fold, limit)
    write_checkpoint(checkpoint, path)
    return checkpoint


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Read and validate a checkpoint file.

    Raises:
        CheckpointVersionError: schema_version differs from this build
        CheckpointCorruptionError: unreadable JSON or hash mismatch
    """
    try:
        document = json.loads(Path(path).read_text())
        body = document["checkpoint"]
        recorded = document["sha256"]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise CheckpointCorruptionError(f"checkpoint {path} is unreadable: {e}") from e

    version = body.get("schema_version")
    if version != Config.CHECKPOINT_SCHEMA_VERSION:
        raise CheckpointVersionError(
            f"checkpoint schema {version} does not match {Config.CHECKPOINT_SCHEMA_VERSION}"
        )
    if _digest(body) != recorded:
        raise CheckpointCorruptionError(f"checkpoint {path} failed its integrity hash")
    try:
        return Checkpoint.model_validate(body)
    except ValidationError as e:
        raise CheckpointCorruptionError(f"checkpoint {path} has invalid fields: {e}") from e


def restore_fold(checkpoint: Checkpoint) -> ClaimFold:
    """Rebuild a ClaimFold that continues exactly where the checkpoint stopped"""
    fold = ClaimFold(checkpoint.claims, checkpoint.settings)
    fold.stats.n = checkpoint.last_index - 1
    fold.stats.last_prime = checkpoint.last_prime
    fold.stats.sum_g = checkpoint.sum_g
    fold.stats.sum_h = KahanSum(checkpoint.sum_h_value, checkpoint.sum_h_compensation)
    fold.tracker = checkpoint.record_tracker_state.model_copy(deep=True)
    for claim in fold.claims:
        fold.accumulators[claim] = checkpoint.claim_accumulators[claim.value].model_copy(deep=True)
    return fold


def checkpoint_resume(path: Union[str, Path]) -> ClaimFold:
    return restore_fold(load_checkpoint(path))
