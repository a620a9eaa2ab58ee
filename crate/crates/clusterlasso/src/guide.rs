//! Binds the guide chapters (book/src) into the doc-test run, so every code
//! block in the book compiles and passes under `cargo test`.

#[doc = include_str!("../../../book/src/overview.md")]
pub const OVERVIEW: () = ();

#[doc = include_str!("../../../book/src/getting-started.md")]
pub const GETTING_STARTED: () = ();

#[doc = include_str!("../../../book/src/data.md")]
pub const DATA: () = ();

#[doc = include_str!("../../../book/src/mixtures.md")]
pub const MIXTURES: () = ();

#[doc = include_str!("../../../book/src/model-selection.md")]
pub const MODEL_SELECTION: () = ();

#[doc = include_str!("../../../book/src/pca.md")]
pub const PCA: () = ();

#[doc = include_str!("../../../book/src/lasso.md")]
pub const LASSO: () = ();

#[doc = include_str!("../../../book/src/pipeline.md")]
pub const PIPELINE: () = ();

#[doc = include_str!("../../../book/src/synthetic.md")]
pub const SYNTHETIC: () = ();

#[doc = include_str!("../../../book/src/cli.md")]
pub const CLI: () = ();

#[doc = include_str!("../../../book/src/reproducibility.md")]
pub const REPRODUCIBILITY: () = ();
