//! Criterion benches for the sampler, walk engine, collection and filtration; see `benches/`.
