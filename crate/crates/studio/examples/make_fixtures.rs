//! Regenerate the synthetic parts of the bundled corpus: work images,
//! `patterns.jsonl` and `exemplars.jsonl`.
//!
//! cargo run -p jianzhi-studio --example make_fixtures -- [corpus dir]

use std::path::PathBuf;

use jianzhi_studio::corpus::{write_jsonl, EXEMPLARS_SCHEMA, PATTERNS_SCHEMA};
use jianzhi_studio::fixtures::{exemplars, render_work, work_id, work_patterns};
use jianzhi_studio::imaging::{binary_to_gray, encode_gray_png};

fn main() -> anyhow::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus"), PathBuf::from);
    std::fs::create_dir_all(dir.join("images"))?;
    let mut patterns = Vec::new();
    for n in 1..=20 {
        let png = encode_gray_png(&binary_to_gray(&render_work(n)));
        std::fs::write(dir.join(format!("images/{}.png", work_id(n))), png)?;
        patterns.extend(work_patterns(n));
    }
    write_jsonl(&dir.join("patterns.jsonl"), PATTERNS_SCHEMA, &patterns)?;
    write_jsonl(&dir.join("exemplars.jsonl"), EXEMPLARS_SCHEMA, &exemplars())?;
    println!("wrote 20 images, {} pattern labels to {}", patterns.len(), dir.display());
    Ok(())
}
