//! Region, identifier, pattern and frequency filters on a cohort with known
//! alternate-allele counts.

use hapview::ingest::parse_vcf;
use hapview::synth::Cohort;
use hapview::transform::{FrequencyMode, Step, ViewChain};

fn main() {
    // 200 subjects = 400 alleles, so 2 alternate alleles is exactly 0.005.
    let counts = [0, 1, 2, 3, 10, 200, 399, 2];
    let cohort = Cohort::with_alt_counts(3, 200, &counts);
    let ds = parse_vcf(cohort.vcf().as_bytes()).unwrap().dataset;

    let show = |label: &str, steps: Vec<Step>| {
        let (view, reports) = ViewChain::new(steps).derive(&ds).unwrap();
        let ids: Vec<&str> = view.variants().iter().map(|&v| ds.variants.id(v as usize)).collect();
        match reports[0].unknown_ids {
            Some(n) => println!("{label:<24} {ids:?}  ({n} unknown ids)"),
            None => println!("{label:<24} {ids:?}"),
        }
    };
    for mode in [FrequencyMode::Above, FrequencyMode::Below] {
        show(&format!("frequency {mode:?} 0.005"), vec![Step::FilterFrequency { threshold: 0.005, mode }]);
    }
    let first = cohort.variants[0].position;
    show("region first 3 sites", vec![Step::FilterRegion { chrom: "22".into(), start: first, end: cohort.variants[2].position }]);
    show("ids", vec![Step::FilterIds { ids: vec![cohort.variants[4].id.clone(), "rs0".into()] }]);
    show("regex rs10000[5-7]", vec![Step::FilterRegex { pattern: "rs10000[5-7]".into() }]);
}
