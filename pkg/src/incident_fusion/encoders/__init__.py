"""Description and traffic-series encoders producing fixed-width feature vectors."""
from .autoencoder import SeriesAutoencoder, autoencode, series_pool, train_autoencoder
from .base import (
    ACTIVATIONS,
    SERIES_SOURCES,
    SENTIMENT_SOURCES,
    UNITS,
    EncodedVector,
    EncoderConfig,
    TrainingReport,
)
from .cache import EncodedCache, encode_all, model_file, read_encoded, write_encoded
from .sentiment import SentimentEncoder, sentiment_encode, train_sentiment_encoder
from .text import text_to_binary

__all__ = [
    "ACTIVATIONS",
    "UNITS",
    "SERIES_SOURCES",
    "SENTIMENT_SOURCES",
    "EncoderConfig",
    "EncodedVector",
    "TrainingReport",
    "text_to_binary",
    "SentimentEncoder",
    "train_sentiment_encoder",
    "sentiment_encode",
    "SeriesAutoencoder",
    "train_autoencoder",
    "autoencode",
    "series_pool",
    "EncodedCache",
    "encode_all",
    "model_file",
    "write_encoded",
    "read_encoded",
]
