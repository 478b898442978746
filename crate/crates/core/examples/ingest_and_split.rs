//! Parse a check-in file and split it at the threshold that makes a chosen
//! share of the target POIs unseen.
//!
//! ```text
//! cargo run --example ingest_and_split -- [checkins.tsv] [unseen-ratio]
//! ```
//! Without a file, a synthetic one with venue turnover is generated.

use std::io::BufReader;

use nextpoi::data::{find_threshold_for_unseen_ratio, parse_checkins, temporal_split, IngestFormat, SplitManifest};
use nextpoi::synthetic::{generate, SyntheticConfig};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ratio: f64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(0.8);

    let data = match args.first() {
        Some(path) => parse_checkins(BufReader::new(std::fs::File::open(path)?), &IngestFormat::default())?,
        None => {
            let synthetic = generate(&SyntheticConfig::churn())?;
            let mut tsv = Vec::new();
            synthetic.write_tsv(&mut tsv)?;
            parse_checkins(&tsv[..], &IngestFormat::default())?
        }
    };
    let s = &data.stats;
    println!(
        "{} lines, {} malformed: {} visits by {} users at {} POIs in {} categories",
        s.lines, s.malformed, s.visits, s.users, s.pois, s.categories
    );
    println!("projection zone: {:?}", data.pois.zone());

    let choice = find_threshold_for_unseen_ratio(&data.histories, ratio)?;
    let split = temporal_split(&data.histories, choice.threshold, 42)?;
    println!(
        "threshold {} -> unseen ratio {:.4}; {} training users, {} validation and {} test targets, {} unseen POIs",
        split.threshold,
        split.unseen_ratio(),
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        split.unseen_poi_ids.len()
    );
    let manifest = SplitManifest::from_split(&split);
    let unseen_test = split.test.iter().filter(|&&t| split.is_unseen_target(t)).count();
    println!(
        "manifest lists {} targets; {unseen_test} test targets visit an unseen POI",
        manifest.targets.len()
    );
    Ok(())
}
