//! Writes the synthetic stand-in networks as `.mlg` files.
//!
//!     cargo run --release -p mgnn-core --example standins -- data

use std::path::PathBuf;

use mgnn::exp::{gene_standin, social_standin};
use mgnn::mlg::{save_mlg, MlgDocument};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;

    let (net, labels) = gene_standin(0)?;
    let mut doc = MlgDocument::new(net);
    doc.labels = labels.into_iter().enumerate().map(|(i, y)| (i, format!("class{y}"))).collect();
    save_mlg(&doc, &dir.join("genes.mlg"))?;

    save_mlg(&MlgDocument::new(social_standin(0)?), &dir.join("social.mlg"))?;
    println!("wrote {}", dir.display());
    Ok(())
}
