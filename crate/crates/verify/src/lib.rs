//! Holds the `acceptance` test target. Run it with `cargo test -p dualguide-verify --test acceptance`.
