"""flowemb: self-supervised embeddings and anomaly scoring for per-user
security-event streams.

The pipeline: parse flow/event logs into per-user daily feature windows,
group weekday windows into user-week sequences, segment the user population,
learn a representation per segment (PCA, feed-forward autoencoder, or an
attention-based sequence-to-sequence autoencoder), then score each user-week
by its distance to the training population in representation space.
"""
__version__ = "0.1.0"
