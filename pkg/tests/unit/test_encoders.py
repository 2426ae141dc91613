import numpy as np
import pandas as pd
import pytest

from incident_fusion.encoders import (
    SERIES_SOURCES,
    EncodedVector,
    EncoderConfig,
    SentimentEncoder,
    SeriesAutoencoder,
    autoencode,
    encode_all,
    model_file,
    read_encoded,
    sentiment_encode,
    series_pool,
    text_to_binary,
    train_autoencoder,
    train_sentiment_encoder,
    write_encoded,
)
from incident_fusion.encoders.sentiment import split_indices
from incident_fusion.errors import (
    ConfigurationError,
    DimensionError,
    EncodingError,
    InsufficientDataError,
    MissingArtifactError,
)
from incident_fusion.ingest import IncidentRecord
from incident_fusion.matching import match_all
from incident_fusion.nn import load_model
from incident_fusion.synthetic import SyntheticConfig, generate_synthetic


def _records(n, severity=lambda i: 2, text=lambda i: "Accident on I-280 Northbound."):
    start = pd.Timestamp("2019-03-01T08:00", tz="UTC")
    return [
        IncidentRecord(f"R-{i:03d}", 37.7, -122.4, start, start + pd.Timedelta(minutes=30), severity(i), text(i))
        for i in range(n)
    ]


def test_text_repeats_to_two_hundred_characters():
    bits = text_to_binary("abc")
    assert bits.shape == (200, 7)
    assert set(np.unique(bits)) <= {0.0, 1.0}
    codes = (bits * (2 ** np.arange(7))).sum(axis=1).astype(int)
    assert "".join(map(chr, codes[:7])) == "abcabca"
    assert chr(codes[-1]) == "abc"[199 % 3]


def test_text_bits_least_significant_first():
    assert text_to_binary("a")[0].tolist() == [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]


def test_text_lowercases_and_replaces_non_ascii():
    np.testing.assert_array_equal(text_to_binary("Aéb"), text_to_binary("a b"))


def test_text_keeps_surrounding_spaces_when_repeating():
    bits = text_to_binary(" ab ")
    codes = (bits * (2 ** np.arange(7))).sum(axis=1).astype(int)
    assert "".join(map(chr, codes[:8])) == " ab  ab "


def test_empty_text_is_an_encoding_error():
    with pytest.raises(EncodingError):
        text_to_binary("éé  ")


def test_encoder_config_validation():
    with pytest.raises(ConfigurationError, match="units"):
        EncoderConfig(units=3)
    with pytest.raises(ConfigurationError, match="activation"):
        EncoderConfig(activation="identity")
    with pytest.raises(ConfigurationError, match="epochs"):
        EncoderConfig(epochs=0)


@pytest.mark.parametrize(
    "activation, values, ok",
    [
        ("sigmoid", [0.2, 0.9], True),
        ("sigmoid", [0.0, 1.0], True),
        ("sigmoid", [-1e-9, 0.5], False),
        ("tanh", [-0.99, 0.99], True),
        ("tanh", [-1.0, 1.0], True),
        ("tanh", [0.0, 1.0 + 1e-9], False),
        ("relu", [0.0, 7.0], True),
        ("relu", [-0.1, 1.0], False),
        ("elu", [-0.5, 3.0], True),
        ("elu", [-1.0, np.nan], False),
    ],
)
def test_encoded_vector_codomain(activation, values, ok):
    vec = EncodedVector("x", "Speed", values, EncoderConfig(units=2, activation=activation))
    assert vec.in_codomain() is ok


def test_encoded_vector_width_is_checked():
    with pytest.raises(DimensionError):
        EncodedVector("x", "Speed", [1.0, 2.0, 3.0], EncoderConfig(units=2))


def test_split_is_disjoint_and_covers_everything():
    train, val, test = split_indices(101, np.random.default_rng(0))
    assert (len(train), len(val), len(test)) == (70, 20, 11)
    assert sorted(np.concatenate([train, val, test]).tolist()) == list(range(101))


def test_sentiment_needs_fifty_records():
    with pytest.raises(InsufficientDataError, match="at least 50"):
        train_sentiment_encoder(_records(49), EncoderConfig(epochs=1))


def test_sentiment_constant_target_and_report_length():
    """With one severity the MSE head starts at the answer and stays near it."""
    cfg = EncoderConfig(units=4, activation="sigmoid", epochs=40, batch_size=64, seed=3)
    encoder, report = train_sentiment_encoder(_records(60), cfg)
    assert len(report) == 40
    assert len(report.validation_loss) == 40
    assert report.validation_loss[-1] < 0.05
    assert report.test_loss is not None
    vec = sentiment_encode(encoder, "Accident on I-280 Northbound.", "R-000")
    assert vec.source == "LSTM-sent"
    assert vec.values.shape == (4,)
    assert vec.in_codomain()


def test_sentiment_training_is_deterministic():
    cfg = EncoderConfig(units=2, activation="tanh", epochs=1, seed=5, head="ce")
    records = _records(50, severity=lambda i: 1 + i % 4)
    a, _ = train_sentiment_encoder(records, cfg)
    b, _ = train_sentiment_encoder(records, cfg)
    for name, value in a.parameters().items():
        np.testing.assert_array_equal(value, b.parameters()[name])
    assert a.source == "LSTM-sentCE"
    assert a.predict(["Accident."]).shape == (1, 5)


def test_sentiment_save_and_load(tmp_path):
    encoder, _ = train_sentiment_encoder(_records(50), EncoderConfig(units=2, epochs=1))
    path = tmp_path / "sentiment.json"
    encoder.save(path)
    again = SentimentEncoder.load(path)
    assert again.config == encoder.config
    np.testing.assert_allclose(again.encode(["Lane blocked."]), encoder.encode(["Lane blocked."]))
    with pytest.raises(ConfigurationError):
        SeriesAutoencoder.load(path)


@pytest.mark.slow
def test_sentiment_learns_a_keyword():
    """Severity set by the word "blocked" is learned to validation MSE below 0.1."""
    records = _records(
        200,
        severity=lambda i: 3 if i % 2 else 2,
        text=lambda i: "Lane blocked on I-80." if i % 2 else "Accident on US-101 Southbound.",
    )
    encoder, report = train_sentiment_encoder(records, EncoderConfig(units=8, activation="tanh", epochs=15, seed=0))
    assert report.validation_loss[-1] < 0.1
    pred = encoder.predict(["Lane blocked on I-80.", "Accident on US-101 Southbound."])
    assert pred[0] > pred[1]


def test_autoencoder_fits_a_constant_pool():
    """A pool of constant 0.5 series is reconstructed to MSE below 1e-3."""
    pool = np.full((320, 288), 0.5)
    cfg = EncoderConfig(units=4, activation="relu", epochs=30, seed=0)
    model, report = train_autoencoder(pool, cfg)
    assert len(report) == 30
    assert report.train_loss[-1] < 1e-3
    assert report.validation_loss[-1] < 1e-3
    assert model.encode(pool[:3]).shape == (3, 4)


def test_autoencoder_input_checks():
    cfg = EncoderConfig(units=2, epochs=1)
    with pytest.raises(InsufficientDataError):
        train_autoencoder(np.zeros((0, 288)), cfg)
    with pytest.raises(DimensionError):
        train_autoencoder(np.zeros((4, 100)), cfg)


def test_autoencode_range_determinism_and_distinct_inputs(tmp_path):
    rng = np.random.default_rng(0)
    pool = rng.uniform(0, 1, size=(40, 288))
    model, _ = train_autoencoder(pool, EncoderConfig(units=8, activation="tanh", epochs=2))
    a = autoencode(model, pool[0], "Flow7", "I-1")
    assert a.source == "Flow7"
    assert a.values.shape == (8,)
    assert a.in_codomain()
    np.testing.assert_array_equal(a.values, autoencode(model, pool[0], "Flow7").values)
    assert not np.array_equal(a.values, autoencode(model, pool[1], "Flow7").values)
    with pytest.raises(DimensionError):
        autoencode(model, np.zeros(287), "Flow7")
    path = tmp_path / "ae.json"
    model.save(path)
    np.testing.assert_allclose(SeriesAutoencoder.load(path).encode(pool[:2]), model.encode(pool[:2]))


@pytest.fixture(scope="module")
def small_world():
    incidents, stations = generate_synthetic(SyntheticConfig(n_incidents=50, n_stations=5, seed=2))
    matched, _ = match_all(incidents, stations)
    return incidents, matched


def test_series_pool_stacks_six_channels(small_world):
    _, matched = small_world
    assert series_pool(matched).shape == (6 * len(matched), 288)


def test_encode_all_and_cache_round_trip(small_world, tmp_path):
    """Every requested source gets a (units, activation) entry that survives the CSV cache."""
    incidents, matched = small_world
    cache, reports = encode_all(incidents, matched, units=[2], activations=["sigmoid"], epochs=1)
    assert cache.keys() == sorted([(s, 2, "sigmoid") for s in (*SERIES_SOURCES, "LSTM-sent")])
    assert set(reports) == {("autoencoder", 2, "sigmoid"), ("LSTM-sent", 2, "sigmoid")}
    assert len(cache.get("LSTM-sent", 2, "sigmoid")) == len(incidents)
    assert len(cache.get("Speed", 2, "sigmoid")) == len(matched)
    path = tmp_path / "encoded.csv"
    write_encoded(cache, path)
    again = read_encoded(path)
    for key in cache.keys():
        pd.testing.assert_frame_equal(again.get(*key), cache.get(*key), check_exact=False, rtol=1e-9)
    with pytest.raises(MissingArtifactError):
        again.get("Speed", 16, "relu")


def test_encode_all_saves_reloadable_models(small_world, tmp_path):
    """Saved encoders reproduce the cached vectors and carry the normalisation constants."""
    incidents, matched = small_world
    norm = {"max_speed": 120.0, "max_flow": 90.0}
    cache, _ = encode_all(
        incidents, matched, units=[2], activations=["tanh"], epochs=1,
        model_dir=tmp_path / "models", normalization=norm,
    )
    assert sorted(p.name for p in (tmp_path / "models").iterdir()) == [
        model_file("LSTM-sent", 2, "tanh"), model_file("autoencoder", 2, "tanh")
    ]
    sentiment = SentimentEncoder.load(tmp_path / "models" / "LSTM-sent_2_tanh.json")
    np.testing.assert_array_equal(
        sentiment.encode([r.description for r in incidents]), cache.get("LSTM-sent", 2, "tanh").to_numpy()
    )
    autoencoder = SeriesAutoencoder.load(tmp_path / "models" / "autoencoder_2_tanh.json")
    flow7 = np.vstack([m.flow7.values for m in matched])
    np.testing.assert_array_equal(autoencoder.encode(flow7), cache.get("Flow7", 2, "tanh").to_numpy())
    _, meta = load_model(tmp_path / "models" / "autoencoder_2_tanh.json")
    assert meta["normalization"] == norm


def test_encode_all_rejects_unknown_sources(small_world):
    incidents, matched = small_world
    with pytest.raises(ConfigurationError, match="unknown encoded source"):
        encode_all(incidents, matched, units=[2], activations=["relu"], sources=["Radar"])
