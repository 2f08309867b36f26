//! The narrative guide, doc-tested.
//!
//! Each module below holds one chapter of the book in `book/`, included
//! verbatim so that every code block in the book compiles and runs under
//! `cargo test --doc`. Read the rendered book for the prose; these modules
//! exist to keep it honest.

macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        pub mod $name {}
    };
}

chapter!(introduction, "../../../book/src/introduction.md");
chapter!(networks, "../../../book/src/networks.md");
chapter!(isolator, "../../../book/src/isolator.md");
chapter!(expansion, "../../../book/src/expansion.md");
chapter!(noise, "../../../book/src/noise.md");
chapter!(fitting, "../../../book/src/fitting.md");
chapter!(cli, "../../../book/src/cli.md");
