//! Estimate the distance prior between consecutive visits and query it.
//!
//! ```text
//! cargo run --example proximity_prior -- [histogram.svg]
//! ```

use nextpoi::data::{find_threshold_for_unseen_ratio, temporal_split};
use nextpoi::eval::histogram_svg;
use nextpoi::geo::{estimate_prior, planar_distance, DistanceBucketing};
use nextpoi::synthetic::{generate, SyntheticConfig};

fn main() -> anyhow::Result<()> {
    let data = generate(&SyntheticConfig::churn())?;
    let histories = data.histories();
    let threshold = find_threshold_for_unseen_ratio(&histories, 0.5)?.threshold;
    let split = temporal_split(&histories, threshold, 1)?;

    let prior = estimate_prior(&split.train, &data.pois, DistanceBucketing::default(), 1.0)?;
    println!("{} consecutive pairs in {} buckets", prior.total_pairs(), prior.counts().len());
    for (b, (&c, &p)) in prior.counts().iter().zip(prior.probabilities()).enumerate().filter(|(_, (c, _))| **c > 0) {
        let (lo, hi) = prior.bucketing().bounds(b);
        println!("  [{lo:>5.1}, {hi:>5.1}) km  {c:>6}  p = {p:.5}");
    }

    let pois = data.pois.pois();
    let (a, b) = (&pois[0], &pois[pois.len() - 1]);
    println!(
        "{} -> {}: {:.2} km, prior {:.5}",
        a.poi_id,
        b.poi_id,
        planar_distance(a, b),
        prior.prior_probability(a, b)
    );

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, histogram_svg(&prior))?;
        println!("histogram written to {path}");
    }
    Ok(())
}
