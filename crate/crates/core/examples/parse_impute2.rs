//! Write a synthetic cohort as IMPUTE2 haplotypes and read it back.

use hapview::ingest::{parse_impute2, parse_vcf};
use hapview::synth::Cohort;

fn main() {
    let cohort = Cohort::random(7, 12, 40);
    let (haps, samples) = cohort.impute2();
    println!("{}", haps.lines().next().unwrap());

    let from_haps = parse_impute2(haps.as_bytes(), samples.as_bytes()).expect("valid haplotypes");
    let from_vcf = parse_vcf(cohort.vcf().as_bytes()).expect("valid VCF");
    let (a, b) = (&from_haps.dataset.matrix, &from_vcf.dataset.matrix);
    let agree = (0..cohort.n_subjects())
        .all(|s| (0..cohort.n_variants()).all(|v| a.get_genotype(s, v).unwrap() == b.get_genotype(s, v).unwrap()));
    println!("subjects {:?}..", &from_haps.dataset.subjects.ids()[..3]);
    println!("IMPUTE2 and VCF parses agree: {agree}");
}
