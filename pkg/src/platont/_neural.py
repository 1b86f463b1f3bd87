"""Indicator encoders, attention-aggregating decoders and their exact gradients.

Each indicator channel (delay, loss, bandwidth) has an encoder MLP mapping
standardised path indicators to a latent vector, and a decoder MLP mapping a
latent vector back to indicators. With attention, every decoder reads the
softmax-weighted combination of the three channel latents; without it, each
decoder reads its own channel's latent.

Parameters live in a flat, ordered name-to-array mapping (``ModelParams``),
so the optimiser and checkpoint codec treat them uniformly; views
(:class:`MlpParams`, :class:`AttentionParams`) share the same arrays.
"""

import json
import struct
import pathlib
import dataclasses
import typing as t

import numpy as np

from . import _common
from . import _exceptions

ModelParams = t.Dict[str, np.ndarray]
ParamGrads = t.Dict[str, np.ndarray]

CHECKPOINT_MAGIC = b"PLATONT1"
DEFAULT_HIDDEN = (128, 64)
DEFAULT_LATENT_DIM = 32
DEFAULT_DROPOUT = 0.1
LATENT_BIAS_SCALE = 0.1
_INIT_STREAM = 21
_DROPOUT_STREAM = 22


@dataclasses.dataclass
class ModelConfig(_common.Deserialisable, _common.Serialisable):
    """Model architecture."""

    hidden: t.Tuple[int, ...] = DEFAULT_HIDDEN
    """Encoder hidden layer widths (decoders mirror them)."""

    latent_dim: int = DEFAULT_LATENT_DIM
    """Latent dimension."""

    dropout: float = DEFAULT_DROPOUT
    """Dropout rate on hidden layers, in train mode."""

    use_attention: bool = True
    """Decode from the attention-weighted latent, rather than per channel."""

    @classmethod
    def from_data(cls, data) -> "ModelConfig":
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise _exceptions.ValidationError(
                f"Unknown model config keys: {sorted(unknown)}"
            )
        config = cls(**data)
        config.hidden = tuple(int(h) for h in config.hidden)
        return config

    def to_data(self):
        data = dataclasses.asdict(self)
        data["hidden"] = list(self.hidden)
        return data


@dataclasses.dataclass
class MlpParams:
    """Feed-forward network parameters: ReLU hidden layers, linear output."""

    weights: t.List[np.ndarray]
    """Layer weights, input by output."""

    biases: t.List[np.ndarray]
    """Layer biases."""

    dropout: float = 0.0
    """Dropout rate on hidden layers, in train mode."""

    @property
    def input_dim(self) -> int:
        """Input dimension."""
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        """Output dimension."""
        return self.weights[-1].shape[1]


@dataclasses.dataclass
class AttentionParams:
    """Linear map from concatenated channel latents to three logits."""

    weight: np.ndarray
    """Weight, three latent dimensions by 3."""

    bias: np.ndarray
    """Logit bias (3)."""


@dataclasses.dataclass
class MlpCache:
    """Forward-pass record of an MLP, for backward."""

    inputs: t.List[np.ndarray]
    """Input to each layer."""

    pre_activations: t.List[np.ndarray]
    """Pre-activation of each layer."""

    masks: t.List[t.Optional[np.ndarray]]
    """Inverted dropout mask of each hidden layer (``None`` in eval mode)."""


@dataclasses.dataclass
class LatentBatch:
    """Latent vectors of one channel for a batch."""

    values: np.ndarray
    """Latents (rows by latent dimension)."""

    timestamps: t.Optional[np.ndarray] = None
    """Time step of each row."""

    cache: t.Optional[MlpCache] = dataclasses.field(default=None, repr=False)
    """Encoder forward record."""

    @property
    def size(self) -> int:
        """Number of rows."""
        return self.values.shape[0]


@dataclasses.dataclass
class Decoded:
    """Decoder outputs of one channel for a batch (standardised scale)."""

    values: np.ndarray
    """Outputs (rows by indicator dimension)."""

    cache: t.Optional[MlpCache] = dataclasses.field(default=None, repr=False)
    """Decoder forward record."""


@dataclasses.dataclass
class Standardizer(_common.Deserialisable, _common.Serialisable):
    """Per-feature standardisation of each indicator channel."""

    means: t.List[np.ndarray]
    """Feature means, per channel."""

    scales: t.List[np.ndarray]
    """Feature standard deviations (1 where constant), per channel."""

    @classmethod
    def fit(cls, channels: t.Sequence[np.ndarray]) -> "Standardizer":
        """Fit to training indicators."""
        means, scales = [], []
        for values in channels:
            values = np.asarray(values, dtype=float)
            std = values.std(axis=0)
            means.append(values.mean(axis=0))
            scales.append(np.where(std > 1e-8, std, 1.0))
        return cls(means=means, scales=scales)

    @classmethod
    def identity(cls, dims: t.Sequence[int]) -> "Standardizer":
        """Standardizer leaving values unchanged."""
        return cls(means=[np.zeros(d) for d in dims], scales=[np.ones(d) for d in dims])

    def apply(self, channel: int, values: np.ndarray) -> np.ndarray:
        """Standardise one channel."""
        return (values - self.means[channel]) / self.scales[channel]

    def invert(self, channel: int, values: np.ndarray) -> np.ndarray:
        """Map one channel back to indicator scale."""
        return self.means[channel] + self.scales[channel] * values

    @classmethod
    def from_data(cls, data) -> "Standardizer":
        return cls(
            means=[np.array(m, dtype=float) for m in data["means"]],
            scales=[np.array(s, dtype=float) for s in data["scales"]],
        )

    def to_data(self):
        return {"means": self.means, "scales": self.scales}


@dataclasses.dataclass
class Model:
    """Encoders, decoders and attention for the three indicator channels."""

    config: ModelConfig
    """Architecture."""

    dims: t.Tuple[int, int, int]
    """Indicator dimension of each channel."""

    params: ModelParams
    """Parameters by name."""

    standardizer: Standardizer
    """Input standardisation."""

    def encoder(self, channel: int) -> MlpParams:
        """Encoder parameters of a channel."""
        name = _common.INDICATORS[channel]
        return _mlp_view(self.params, f"encoder.{name}", self.config)

    def decoder(self, channel: int) -> MlpParams:
        """Decoder parameters of a channel."""
        name = _common.INDICATORS[channel]
        return _mlp_view(self.params, f"decoder.{name}", self.config)

    @property
    def attention(self) -> t.Optional[AttentionParams]:
        """Attention parameters, if decoding from the aggregated latent."""
        if not self.config.use_attention:
            return None
        return AttentionParams(
            weight=self.params["attention.w"], bias=self.params["attention.b"]
        )

    @property
    def parameter_count(self) -> int:
        """Total number of scalar parameters."""
        return sum(p.size for p in self.params.values())

    def with_params(self, params: ModelParams) -> "Model":
        """Copy with other parameters."""
        return dataclasses.replace(self, params=params)


@dataclasses.dataclass
class ForwardState:
    """Whole-model forward pass."""

    latents: t.List[np.ndarray]
    """Channel latents."""

    aggregated: t.Optional[np.ndarray]
    """Attention-aggregated latent (``None`` without attention)."""

    attention_weights: t.Optional[np.ndarray]
    """Attention weights, rows by 3 (``None`` without attention)."""

    reconstructions: t.List[np.ndarray]
    """Channel reconstructions, indicator scale."""

    model: Model = dataclasses.field(repr=False)
    """Model run."""

    encoder_caches: t.Optional[t.List[MlpCache]] = dataclasses.field(
        default=None, repr=False
    )
    """Encoder forward records, ``None`` unless recorded."""

    decoder_caches: t.Optional[t.List[MlpCache]] = dataclasses.field(
        default=None, repr=False
    )
    """Decoder forward records, ``None`` unless recorded."""


def _mlp_view(params: ModelParams, prefix: str, config: ModelConfig) -> MlpParams:
    weights, biases = [], []
    layer = 0
    while f"{prefix}.w{layer}" in params:
        weights.append(params[f"{prefix}.w{layer}"])
        biases.append(params[f"{prefix}.b{layer}"])
        layer += 1
    return MlpParams(weights=weights, biases=biases, dropout=config.dropout)


def _layer_dims(config: ModelConfig, dim: int) -> t.Tuple[t.List[int], t.List[int]]:
    encoder = [dim, *config.hidden, config.latent_dim]
    return encoder, encoder[::-1]


def init_model(
    dims: t.Sequence[int],
    config: ModelConfig = None,
    seed: int = 0,
    standardizer: Standardizer = None,
) -> Model:
    """Initialise a model.

    Weights are uniform in ``±√(6/(fan_in + fan_out))``, drawn in parameter
    name order from the seeded stream. Encoder output biases are uniform in
    ``±LATENT_BIAS_SCALE``, so rows with no active hidden unit still have
    non-zero latents; other biases are zero.

    Args:
        dims: indicator dimension of each channel
        config: architecture, default if not given
        seed: random seed
        standardizer: input standardisation, identity if not given

    Returns:
        model
    """

    config = config or ModelConfig()
    dims = tuple(int(d) for d in dims)
    rng = _common.make_rng(seed, _INIT_STREAM)
    params = {}

    def add_mlp(prefix: str, layer_dims: t.List[int], latent: bool) -> None:
        last = len(layer_dims) - 2
        for layer, (fan_in, fan_out) in enumerate(zip(layer_dims[:-1], layer_dims[1:])):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weight = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            params[f"{prefix}.w{layer}"] = weight
            if latent and layer == last:
                bias = rng.uniform(-LATENT_BIAS_SCALE, LATENT_BIAS_SCALE, size=fan_out)
            else:
                bias = np.zeros(fan_out)
            params[f"{prefix}.b{layer}"] = bias

    for channel, name in enumerate(_common.INDICATORS):
        add_mlp(f"encoder.{name}", _layer_dims(config, dims[channel])[0], True)
    for channel, name in enumerate(_common.INDICATORS):
        add_mlp(f"decoder.{name}", _layer_dims(config, dims[channel])[1], False)
    if config.use_attention:
        fan_in = 3 * config.latent_dim
        limit = np.sqrt(6.0 / (fan_in + 3))
        params["attention.w"] = rng.uniform(-limit, limit, size=(fan_in, 3))
        params["attention.b"] = np.zeros(3)

    return Model(
        config=config,
        dims=dims,
        params=params,
        standardizer=standardizer or Standardizer.identity(dims),
    )


def zeros_like(params: ModelParams) -> ParamGrads:
    """Zero arrays shaped like some parameters."""
    return {name: np.zeros_like(value) for name, value in params.items()}


def mlp_forward(
    params: MlpParams,
    x: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator = None,
) -> t.Tuple[np.ndarray, MlpCache]:
    """Run an MLP.

    Args:
        params: network parameters
        x: inputs (rows by input dimension)
        train_mode: apply inverted dropout to hidden layers
        rng: dropout mask stream, required in train mode with dropout

    Returns:
        outputs and forward record
    """

    cache = MlpCache(inputs=[], pre_activations=[], masks=[])
    h = x
    last = len(params.weights) - 1
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        cache.inputs.append(h)
        a = h @ w + b
        cache.pre_activations.append(a)
        if layer == last:
            return a, cache
        h = np.maximum(a, 0.0)
        mask = None
        if train_mode and params.dropout > 0.0:
            keep = 1.0 - params.dropout
            mask = (rng.random(h.shape) < keep) / keep
            h = h * mask
        cache.masks.append(mask)
    return h, cache


def mlp_backward(
    params: MlpParams,
    cache: MlpCache,
    grad_output: np.ndarray,
) -> t.Tuple[t.List[np.ndarray], t.List[np.ndarray], np.ndarray]:
    """Back-propagate through an MLP.

    Args:
        params: network parameters
        cache: forward record
        grad_output: gradient with respect to outputs

    Returns:
        weight gradients, bias gradients and input gradient

    Raises:
        StateError: no forward record
    """

    if cache is None:
        raise _exceptions.StateError("Backward called without a recorded forward pass")

    grad_weights = [None] * len(params.weights)
    grad_biases = [None] * len(params.biases)
    grad = grad_output
    for layer in reversed(range(len(params.weights))):
        if layer < len(params.weights) - 1:
            mask = cache.masks[layer]
            if mask is not None:
                grad = grad * mask
            grad = grad * (cache.pre_activations[layer] > 0.0)
        grad_weights[layer] = cache.inputs[layer].T @ grad
        grad_biases[layer] = grad.sum(axis=0)
        grad = grad @ params.weights[layer].T
    return grad_weights, grad_biases, grad


def encode(
    params: MlpParams,
    x_batch: np.ndarray,
    train_mode: bool = False,
    seed: int = 0,
    timestamps: np.ndarray = None,
) -> LatentBatch:
    """Encode one channel's (standardised) indicators.

    Args:
        params: encoder parameters
        x_batch: indicators (rows by indicator dimension)
        train_mode: apply dropout, masks drawn from ``seed``
        seed: dropout stream seed
        timestamps: time step of each row

    Returns:
        latents, with the forward record

    Raises:
        ShapeError: column count does not match the encoder input
    """

    x_batch = np.atleast_2d(np.asarray(x_batch, dtype=float))
    if x_batch.shape[1] != params.input_dim:
        raise _exceptions.ShapeError(
            f"Encoder expects {params.input_dim} columns, got {x_batch.shape[1]}"
        )
    rng = _common.make_rng(seed, _DROPOUT_STREAM) if train_mode else None
    values, cache = mlp_forward(params, x_batch, train_mode=train_mode, rng=rng)
    return LatentBatch(values=values, timestamps=timestamps, cache=cache)


def _as_array(latents: t.Union[LatentBatch, np.ndarray]) -> np.ndarray:
    return latents.values if isinstance(latents, LatentBatch) else np.asarray(latents)


def aggregate_latents(
    att: AttentionParams,
    z_delay: t.Union[LatentBatch, np.ndarray],
    z_loss: t.Union[LatentBatch, np.ndarray],
    z_bw: t.Union[LatentBatch, np.ndarray],
) -> t.Tuple[np.ndarray, np.ndarray]:
    """Combine channel latents by per-row softmax attention.

    Args:
        att: attention parameters
        z_delay: delay latents
        z_loss: loss latents
        z_bw: bandwidth latents

    Returns:
        aggregated latents ``Σ w_k·z_k`` and weights (rows by 3)

    Raises:
        ShapeError: channel row counts or widths differ
    """

    latents = [_as_array(z) for z in (z_delay, z_loss, z_bw)]
    if len({z.shape for z in latents}) != 1:
        raise _exceptions.ShapeError(
            f"Channel latent shapes differ: {[z.shape for z in latents]}"
        )
    logits = np.concatenate(latents, axis=1) @ att.weight + att.bias
    logits = logits - logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=1, keepdims=True)
    aggregated = sum(weights[:, k:k + 1] * latents[k] for k in range(3))
    return aggregated, weights


def aggregate_backward(
    att: AttentionParams,
    latents: t.Sequence[np.ndarray],
    weights: np.ndarray,
    grad_aggregated: np.ndarray,
) -> t.Tuple[np.ndarray, np.ndarray, t.List[np.ndarray]]:
    """Back-propagate through attention aggregation.

    Args:
        att: attention parameters
        latents: channel latents of the forward pass
        weights: attention weights of the forward pass
        grad_aggregated: gradient with respect to the aggregated latent

    Returns:
        weight gradient, bias gradient and per-channel latent gradients
    """

    grad_weights = np.stack(
        [np.sum(grad_aggregated * z, axis=1) for z in latents], axis=1
    )
    grad_logits = weights * (
        grad_weights - np.sum(weights * grad_weights, axis=1, keepdims=True)
    )
    concatenated = np.concatenate(latents, axis=1)
    grad_concatenated = grad_logits @ att.weight.T
    width = latents[0].shape[1]
    grad_latents = [
        weights[:, k:k + 1] * grad_aggregated
        + grad_concatenated[:, k * width:(k + 1) * width]
        for k in range(3)
    ]
    return concatenated.T @ grad_logits, grad_logits.sum(axis=0), grad_latents


def decode(
    params: MlpParams,
    att: t.Optional[AttentionParams],
    latents: t.Sequence[t.Union[LatentBatch, np.ndarray]],
    channel: int = 0,
    train_mode: bool = False,
    seed: int = 0,
) -> Decoded:
    """Decode one channel from the three channel latents.

    With attention the decoder reads the aggregated latent; without it, the
    latent of its own channel.

    Args:
        params: decoder parameters of the channel
        att: attention parameters, or ``None`` for per-channel decoding
        latents: delay, loss and bandwidth latents
        channel: channel decoded
        train_mode: apply dropout, masks drawn from ``seed``
        seed: dropout stream seed

    Returns:
        outputs (standardised scale), with the forward record

    Raises:
        ShapeError: latent width does not match the decoder input
    """

    if att is None:
        z = _as_array(latents[channel])
    else:
        z, _ = aggregate_latents(att, *latents)
    if z.shape[1] != params.input_dim:
        raise _exceptions.ShapeError(
            f"Decoder expects latent dimension {params.input_dim}, got {z.shape[1]}"
        )
    rng = _common.make_rng(seed, _DROPOUT_STREAM) if train_mode else None
    values, cache = mlp_forward(params, z, train_mode=train_mode, rng=rng)
    return Decoded(values=values, cache=cache)


def forward(
    model: Model,
    inputs: t.Sequence[np.ndarray],
    train_mode: bool = False,
    seed: int = 0,
    record: bool = True,
) -> ForwardState:
    """Run the whole model on raw indicators.

    Args:
        model: model
        inputs: delay, loss and bandwidth indicators (rows by paths)
        train_mode: apply dropout
        seed: dropout seed; each encoder and decoder uses its own stream
        record: keep forward records for :func:`backward`

    Returns:
        latents, attention and reconstructions
    """

    if len(inputs) != 3:
        raise _exceptions.ShapeError(
            f"Expected 3 indicator channels, got {len(inputs)}"
        )
    rows = {np.shape(x)[0] for x in inputs}
    if len(rows) != 1:
        raise _exceptions.ShapeError(f"Channel row counts differ: {sorted(rows)}")

    latents, encoder_caches = [], []
    for channel, x in enumerate(inputs):
        batch = encode(
            model.encoder(channel),
            model.standardizer.apply(channel, np.asarray(x, dtype=float)),
            train_mode=train_mode,
            seed=_channel_seed(seed, 0, channel),
        )
        latents.append(batch.values)
        encoder_caches.append(batch.cache)

    att = model.attention
    aggregated = weights = None
    if att is not None:
        aggregated, weights = aggregate_latents(att, *latents)

    reconstructions, decoder_caches = [], []
    for channel in range(3):
        decoded = mlp_forward(
            model.decoder(channel),
            latents[channel] if att is None else aggregated,
            train_mode=train_mode,
            rng=(
                _common.make_rng(_channel_seed(seed, 1, channel), _DROPOUT_STREAM)
                if train_mode else None
            ),
        )
        reconstructions.append(model.standardizer.invert(channel, decoded[0]))
        decoder_caches.append(decoded[1])

    return ForwardState(
        latents=latents,
        aggregated=aggregated,
        attention_weights=weights,
        reconstructions=reconstructions,
        model=model,
        encoder_caches=encoder_caches if record else None,
        decoder_caches=decoder_caches if record else None,
    )


def _channel_seed(seed: int, part: int, channel: int) -> int:
    return int(_common.make_rng(seed, _DROPOUT_STREAM, part, channel).integers(2 ** 63))


def backward(
    state: t.Optional[ForwardState],
    grad_reconstructions: t.Sequence[t.Optional[np.ndarray]],
    grad_latents: t.Sequence[t.Optional[np.ndarray]] = None,
) -> t.Tuple[ParamGrads, t.List[np.ndarray]]:
    """Exact reverse-mode gradients of the whole model.

    Args:
        state: recorded forward pass
        grad_reconstructions: gradient with respect to each channel's
            reconstruction (indicator scale), ``None`` for zero
        grad_latents: gradient with respect to each channel's latent (eg
            from the alignment objective), ``None`` for zero

    Returns:
        parameter gradients and raw-input gradients per channel

    Raises:
        StateError: no recorded forward pass
    """

    if state is None or state.encoder_caches is None or state.decoder_caches is None:
        raise _exceptions.StateError("Backward called without a recorded forward pass")

    model = state.model
    grads = zeros_like(model.params)
    att = model.attention
    rows = state.latents[0].shape[0]
    latent_dim = state.latents[0].shape[1]

    grad_decoder_inputs = []
    for channel in range(3):
        grad = grad_reconstructions[channel]
        if grad is None:
            grad = np.zeros((rows, model.dims[channel]))
        grad = np.asarray(grad) * model.standardizer.scales[channel]
        decoder = model.decoder(channel)
        grad_w, grad_b, grad_input = mlp_backward(
            decoder, state.decoder_caches[channel], grad
        )
        _store(grads, f"decoder.{_common.INDICATORS[channel]}", grad_w, grad_b)
        grad_decoder_inputs.append(grad_input)

    if att is None:
        grad_z = grad_decoder_inputs
    else:
        grad_att_w, grad_att_b, grad_z = aggregate_backward(
            att, state.latents, state.attention_weights, sum(grad_decoder_inputs)
        )
        grads["attention.w"] = grad_att_w
        grads["attention.b"] = grad_att_b

    input_grads = []
    for channel in range(3):
        grad = grad_z[channel]
        if grad_latents is not None and grad_latents[channel] is not None:
            grad = grad + grad_latents[channel]
        grad = np.broadcast_to(grad, (rows, latent_dim))
        encoder = model.encoder(channel)
        grad_w, grad_b, grad_input = mlp_backward(
            encoder, state.encoder_caches[channel], grad
        )
        _store(grads, f"encoder.{_common.INDICATORS[channel]}", grad_w, grad_b)
        input_grads.append(grad_input / model.standardizer.scales[channel])
    return grads, input_grads


def _store(
    grads: ParamGrads,
    prefix: str,
    grad_weights: t.List[np.ndarray],
    grad_biases: t.List[np.ndarray],
) -> None:
    for layer, (grad_w, grad_b) in enumerate(zip(grad_weights, grad_biases)):
        grads[f"{prefix}.w{layer}"] = grad_w
        grads[f"{prefix}.b{layer}"] = grad_b


def deviation_flags(config: ModelConfig) -> t.List[str]:
    """Architecture deviations recorded in checkpoints."""
    flags = ["batchnorm_replaced_by_input_standardization"]
    if not config.use_attention:
        flags.append("per_channel_decode")
    return flags


def save_checkpoint(
    model: Model,
    path: t.Union[str, pathlib.Path],
    extra: t.Dict[str, t.Any] = None,
) -> None:
    """Write a model checkpoint.

    Layout: the 8-byte magic ``PLATONT1``, the header length as an unsigned
    64-bit little-endian integer, the UTF-8 JSON header (sorted keys), then
    every tensor listed in the header, in order, as little-endian 64-bit
    floats (row-major). Tensors are the parameters followed by the
    standardizer means and scales.

    Args:
        model: model
        path: checkpoint file
        extra: additional header data (eg training configuration)
    """

    tensors = dict(model.params)
    for channel, name in enumerate(_common.INDICATORS):
        tensors[f"standardizer.{name}.mean"] = model.standardizer.means[channel]
        tensors[f"standardizer.{name}.scale"] = model.standardizer.scales[channel]

    header = {
        "format": 1,
        "dims": list(model.dims),
        "config": model.config.to_data(),
        "deviations": deviation_flags(model.config),
        "tensors": [{"name": n, "shape": list(v.shape)} for n, v in tensors.items()],
        "extra": extra or {},
    }
    header_bytes = _common.canonical_json(header).encode("utf-8")
    payload = b"".join(
        np.ascontiguousarray(v, dtype="<f8").tobytes() for v in tensors.values()
    )
    pathlib.Path(path).write_bytes(
        CHECKPOINT_MAGIC + struct.pack("<Q", len(header_bytes)) + header_bytes + payload
    )


def load_checkpoint(
    path: t.Union[str, pathlib.Path],
) -> t.Tuple[Model, t.Dict[str, t.Any]]:
    """Read a model checkpoint.

    Args:
        path: checkpoint file

    Returns:
        model and header

    Raises:
        FormatError: file is not a valid checkpoint
    """

    data = pathlib.Path(path).read_bytes()
    if data[:8] != CHECKPOINT_MAGIC or len(data) < 16:
        raise _exceptions.FormatError(f"Not a checkpoint file: '{path}'")
    (header_length,) = struct.unpack("<Q", data[8:16])
    try:
        header = json.loads(data[16:16 + header_length].decode("utf-8"))
        specs = [(s["name"], tuple(s["shape"])) for s in header["tensors"]]
        config = ModelConfig.from_data(header["config"])
        dims = tuple(header["dims"])
    except (ValueError, KeyError, TypeError) as e:
        raise _exceptions.FormatError(
            f"Invalid checkpoint header in '{path}': {e}"
        ) from None

    payload = data[16 + header_length:]
    expected = 8 * sum(int(np.prod(shape)) for _, shape in specs)
    if len(payload) != expected:
        raise _exceptions.FormatError(
            f"Checkpoint payload is {len(payload)} bytes, expected {expected}"
        )

    tensors = {}
    offset = 0
    for name, shape in specs:
        count = int(np.prod(shape))
        values = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        tensors[name] = values.astype(float).reshape(shape)
        offset += 8 * count

    standardizer = Standardizer(
        means=[tensors.pop(f"standardizer.{n}.mean") for n in _common.INDICATORS],
        scales=[tensors.pop(f"standardizer.{n}.scale") for n in _common.INDICATORS],
    )
    model = Model(config=config, dims=dims, params=tensors, standardizer=standardizer)
    return model, header
