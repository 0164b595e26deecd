//! Reproduce the population-consensus workflow: keep a region, drop rare
//! variants, sort by population and collapse each population to one row.

use hapview::ingest::parse_vcf;
use hapview::meta::{parse_meta, MetaKind};
use hapview::store::Slot;
use hapview::synth::planted_populations;
use hapview::transform::{View, ViewCell, ViewChain};

fn main() {
    let planted = planted_populations(42, &[("AFR", 40), ("EAS", 40), ("EUR", 40)], 60);
    let mut ds = parse_vcf(planted.cohort.vcf().as_bytes()).unwrap().dataset;
    ds.attach_meta(MetaKind::Subject, parse_meta(planted.subject_meta().as_bytes(), MetaKind::Subject, "pop").unwrap())
        .unwrap();

    let chain = ViewChain::from_json(
        r#"{"steps":[
            {"op":"filter_region","chrom":"22","start":0,"end":99999999},
            {"op":"filter_frequency","threshold":0.005,"mode":"above"},
            {"op":"sort_rows","column":"Population"},
            {"op":"aggregate_rows","grouping":{"column":"Population"},"allele_method":"maximum"}
        ]}"#,
    )
    .unwrap();
    let mut view = View::new(&ds);
    for entry in &chain.steps {
        view.apply(&ds, &entry.step).unwrap();
        println!("{:<16} -> {} rows x {} variants", entry.step.name(), view.n_rows(), view.n_variants());
    }
    for row in 0..view.n_rows() {
        let line: String = view
            .variants()
            .iter()
            .map(|&v| match view.allele_cell(&ds, row, v, Slot::Paternal) {
                ViewCell::Aggregated(c) => c.consensus.map_or('.', |b| b.as_char()),
                ViewCell::Allele(b) => b.map_or('.', |b| b.as_char()),
            })
            .collect();
        println!("{:<6} {line}", view.row_label(&ds, row));
    }
}
