//! MNIST-derived synthetic datasets of image/autocorrelation pairs.

mod container;
mod letters;
mod mnist;
mod synth;

pub use container::{
    load_dataset, load_dataset_head, read_dataset, read_dataset_head, save_dataset, write_dataset, Dataset, DatasetWriter, PRDS_MAGIC,
    PRDS_VERSION,
};
pub use letters::{available_letters, letter_glyph};
pub use mnist::{
    glyphs_from_idx, load_mnist_idx, parse_idx_images, parse_idx_labels, write_idx_images,
    write_idx_labels, DigitGlyph, SourceSplit, IMAGES_MAGIC, LABELS_MAGIC,
};
pub use synth::{
    build_dataset, export_out_of_distribution, generate_datasets, render_out_of_distribution,
    render_sample, DatasetSample, DigitMeta, SampleMeta, SampleMode, SynthConfig,
    MAX_PLACEMENT_ATTEMPTS,
};
