//! Acceptance suite for `midicoth`. The checks live in `tests/acceptance.rs`
//! and run with `cargo test -p midicoth-validation --test acceptance`.
