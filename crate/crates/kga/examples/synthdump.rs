//! Write the synthetic benchmark split (train/valid/test TSVs plus numeric
//! triples) to a directory, ready for the `kga` binary:
//!
//! ```text
//! cargo run -p kga --example synthdump -- bench/
//! kga --train bench/train.tsv --valid bench/valid.tsv --test bench/test.tsv \
//!     --numeric-train bench/numeric_train.tsv --numeric-test bench/numeric_test.tsv grid
//! ```

use kga::synth::{generate, SynthConfig};

fn main() {
    let dir = std::env::args().nth(1).expect("usage: synthdump DIR");
    let data = generate(&SynthConfig::default());
    std::fs::create_dir_all(&dir).unwrap();
    data.write(std::path::Path::new(&dir)).unwrap();
    println!(
        "wrote synthetic benchmark ({} entities, {} train triples) to {dir}",
        data.config.n_entities,
        data.train.len()
    );
}
