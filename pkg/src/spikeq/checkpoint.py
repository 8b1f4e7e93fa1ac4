"""Portable model persistence.

Checkpoints are a single JSON document: format version, a config
snapshot, the encoder and network sections, optional optimizer moments
and a content hash. Numeric tensors are stored as base64 blocks of
little-endian float32 with explicit shapes, so files round-trip exactly
at float32 precision and are byte-identical after a save/load/save
cycle.
"""

import base64
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .encoding import EncoderModel, LearnedEncoder, LogScaleEncoder, TernaryEncoder
from .snn import LifParams, ReadoutParams, SnnModel

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Unreadable, corrupted or incompatible checkpoint file."""


@dataclass
class Checkpoint:
    config: dict
    encoder: dict
    snn: dict
    optimizer: dict | None
    training_step: int
    format_version: int = FORMAT_VERSION

    def build_encoder(self):
        """Reconstruct the encoder object stored in this checkpoint."""
        return decode_encoder(self.encoder)

    def build_snn(self) -> SnnModel:
        return decode_snn(self.snn)


def encode_tensor(array: np.ndarray) -> dict:
    data = np.ascontiguousarray(array, dtype="<f4")
    return {
        "dtype": "float32",
        "shape": list(array.shape),
        "data": base64.b64encode(data.tobytes()).decode("ascii"),
    }


def decode_tensor(obj: dict) -> np.ndarray:
    if obj.get("dtype") != "float32":
        raise CheckpointError(f"unsupported tensor dtype {obj.get('dtype')!r}")
    raw = base64.b64decode(obj["data"])
    flat = np.frombuffer(raw, dtype="<f4")
    shape = tuple(obj["shape"])
    if flat.size != int(np.prod(shape, dtype=np.int64)):
        raise CheckpointError("tensor data inconsistent with declared shape")
    return flat.reshape(shape).astype(float)


def encode_encoder(encoder) -> dict:
    """Serializable section for any of the three encoder kinds."""
    if isinstance(encoder, LearnedEncoder):
        model = encoder.model
        return {
            "type": "learned",
            "n_classes": model.n_classes,
            "m_neurons": model.m_neurons,
            "t_steps": model.t_steps,
            "q_range": [model.q_range[0], model.q_range[1]],
            "graded_bits": model.graded_bits,
            "matrices": encode_tensor(model.matrices),
        }
    if isinstance(encoder, (LogScaleEncoder, TernaryEncoder)):
        return {
            "type": encoder.kind,
            "m_neurons": encoder.m_neurons,
            "t_steps": encoder.t_steps,
            "q_range": [encoder.q_range[0], encoder.q_range[1]],
        }
    raise CheckpointError(f"cannot serialize encoder {type(encoder).__name__}")


def decode_encoder(section: dict):
    kind = section.get("type")
    q_range = tuple(section["q_range"])
    if kind == "learned":
        model = EncoderModel(
            matrices=decode_tensor(section["matrices"]),
            q_range=q_range,
            graded_bits=section.get("graded_bits"),
        )
        expected = (section["n_classes"], section["m_neurons"], section["t_steps"])
        if model.matrices.shape != expected:
            raise CheckpointError(
                f"matrix shape {model.matrices.shape} contradicts header {expected}"
            )
        return LearnedEncoder(model)
    if kind == "log_scale":
        return LogScaleEncoder(q_range, section["m_neurons"], section["t_steps"])
    if kind == "ternary":
        return TernaryEncoder(q_range, section["m_neurons"], section["t_steps"])
    raise CheckpointError(f"unknown encoder type {kind!r}")


def encode_snn(model: SnnModel) -> dict:
    return {
        "n_in": model.n_in,
        "n_hidden": model.n_hidden,
        "n_out": model.n_out,
        "lif": {
            "v_decay": model.lif.v_decay,
            "i_decay": model.lif.i_decay,
            "threshold": model.lif.threshold,
            "reset": model.lif.reset,
        },
        "readout": {
            "v_decay": model.readout.v_decay,
            "i_decay": model.readout.i_decay,
        },
        "surrogate_slope": model.surrogate_slope,
        "readout_statistic": model.readout_statistic,
        "w_ih": encode_tensor(model.w_ih),
        "w_ho": encode_tensor(model.w_ho),
    }


def decode_snn(section: dict) -> SnnModel:
    model = SnnModel(
        w_ih=decode_tensor(section["w_ih"]),
        w_ho=decode_tensor(section["w_ho"]),
        lif=LifParams(**section["lif"]),
        readout=ReadoutParams(**section["readout"]),
        surrogate_slope=section["surrogate_slope"],
        readout_statistic=section["readout_statistic"],
    )
    if model.w_ih.shape != (section["n_hidden"], section["n_in"]) or model.w_ho.shape != (
        section["n_out"],
        section["n_hidden"],
    ):
        raise CheckpointError("weight shapes contradict the checkpoint header")
    return model


def encode_moments(moments) -> dict:
    return {
        "m": {k: encode_tensor(v) for k, v in moments.m.items()},
        "v": {k: encode_tensor(v) for k, v in moments.v.items()},
    }


def _canonical_bytes(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def content_hash(payload: dict) -> str:
    """SHA-256 over the canonical JSON form, excluding the hash field."""
    body = {k: v for k, v in payload.items() if k != "content_hash"}
    return "sha256:" + hashlib.sha256(_canonical_bytes(body)).hexdigest()


def config_hash(config: dict) -> str:
    return "sha256:" + hashlib.sha256(_canonical_bytes(config)).hexdigest()


def save_checkpoint(
    path,
    config: dict,
    encoder,
    snn_model: SnnModel,
    training_step: int = 0,
    moments=None,
) -> str:
    """Write a checkpoint file; returns its content hash."""
    payload = {
        "format_version": FORMAT_VERSION,
        "config": config,
        "encoder": encode_encoder(encoder),
        "snn": encode_snn(snn_model),
        "optimizer": None if moments is None else encode_moments(moments),
        "training_step": int(training_step),
    }
    payload["content_hash"] = content_hash(payload)
    with open(path, "w") as f:
        json.dump(payload, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")
    return payload["content_hash"]


def load_checkpoint(path, verify_hash: bool = True) -> Checkpoint:
    """Parse and validate a checkpoint file."""
    try:
        with open(path) as f:
            payload = json.load(f)
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as err:
        raise CheckpointError(f"cannot parse checkpoint {path}: {err}") from err
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format_version {version!r} not supported "
            f"(this build reads version {FORMAT_VERSION})"
        )
    if verify_hash:
        expected = payload.get("content_hash")
        actual = content_hash(payload)
        if expected != actual:
            raise CheckpointError(
                f"content hash mismatch in {path}: file says {expected}, computed {actual}"
            )
    return Checkpoint(
        config=payload["config"],
        encoder=payload["encoder"],
        snn=payload["snn"],
        optimizer=payload.get("optimizer"),
        training_step=payload.get("training_step", 0),
    )


def file_content_hash(path) -> str:
    """Content hash recorded inside a checkpoint file."""
    with open(path) as f:
        return json.load(f).get("content_hash", "")
