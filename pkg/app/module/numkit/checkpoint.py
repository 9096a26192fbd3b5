"""
Bit-exact JSON payloads for parameter arrays and networks.

Arrays are stored as the hex rendering of their little-endian IEEE-754 bytes, so a
save/load round trip reproduces every float64 bit pattern.
"""

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.core.errors import DataError
from app.module.numkit.layers import Activation, DenseLayer, Mlp


class ArrayPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape: list[int]
    dtype: str = "<f8"
    data: str


class DensePayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    activation: Activation
    weight: ArrayPayload
    bias: ArrayPayload


class MlpPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dims: list[int]
    dropout_rate: float
    seed: int | None = None
    layers: list[DensePayload]


def encode_array(arr: np.ndarray) -> ArrayPayload:
    little = np.ascontiguousarray(arr, dtype="<f8")
    return ArrayPayload(shape=list(little.shape), data=little.tobytes().hex())


def decode_array(payload: ArrayPayload) -> np.ndarray:
    if payload.dtype != "<f8":
        raise DataError(f"Unsupported array dtype in checkpoint: {payload.dtype}")
    try:
        raw = bytes.fromhex(payload.data)
    except ValueError as e:
        raise DataError("Checkpoint array is not valid hex", details=str(e)) from e
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    expected = int(np.prod(payload.shape)) if payload.shape else 1
    if arr.size != expected:
        raise DataError(f"Checkpoint array holds {arr.size} values, shape {payload.shape} needs {expected}")
    return arr.reshape(payload.shape)


def encode_dense(layer: DenseLayer) -> DensePayload:
    return DensePayload(activation=layer.activation, weight=encode_array(layer.weights), bias=encode_array(layer.bias))


def decode_dense(payload: DensePayload) -> DenseLayer:
    return DenseLayer(weights=decode_array(payload.weight), bias=decode_array(payload.bias), activation=payload.activation)


def encode_mlp(net: Mlp, seed: int | None = None) -> MlpPayload:
    dims = [net.in_dim] + [layer.out_dim for layer in net.layers]
    return MlpPayload(dims=dims, dropout_rate=net.dropout_rate, seed=seed, layers=[encode_dense(layer) for layer in net.layers])


def decode_mlp(payload: MlpPayload) -> Mlp:
    net = Mlp(layers=[decode_dense(layer) for layer in payload.layers], dropout_rate=payload.dropout_rate)
    actual = [net.in_dim] + [layer.out_dim for layer in net.layers]
    if actual != payload.dims:
        raise DataError(f"Checkpoint layer dims {payload.dims} do not match stored arrays {actual}")
    return net
