//! Attach subject metadata and apply two stable sorts: the later key becomes
//! the primary order, the earlier one breaks its ties.

use hapview::ingest::parse_vcf;
use hapview::meta::{parse_meta, MetaKind};
use hapview::synth::Cohort;
use hapview::transform::{Step, ViewChain};

const META: &str = "\
ID\tPopulation\tAge
ID\tcategorical\tnumerical
HG00001\tEUR\t31
HG00002\tAFR\t25
HG00003\tEUR\tNA
HG00004\tEAS\t25
HG00005\tAFR\t40
HG00006\tEUR\t25
";

fn main() {
    let mut ds = parse_vcf(Cohort::random(1, 6, 10).vcf().as_bytes()).unwrap().dataset;
    let table = parse_meta(META.as_bytes(), MetaKind::Subject, "subjects").unwrap();
    ds.attach_meta(MetaKind::Subject, table).unwrap();

    let chain = ViewChain::new([
        Step::SortRows { column: "Age".into() },
        Step::SortRows { column: "Population".into() },
    ]);
    let (view, _) = chain.derive(&ds).unwrap();
    let columns = &ds.subject_meta[0].table.columns;
    for row in 0..view.n_rows() {
        let show = |c: usize| columns[c].display(view.subject_meta_value(&ds, row, 0, c)).unwrap_or_else(|| "NA".into());
        println!("{}  {:<4} {}", view.row_label(&ds, row), show(0), show(1));
    }
}
