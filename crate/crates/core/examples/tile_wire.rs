//! Cut a tile from a view, encode it to wire bytes and decode it again.

use hapview::ingest::parse_vcf;
use hapview::synth::Cohort;
use hapview::tile::Tile;
use hapview::transform::{Grouping, Step, View};

fn main() {
    let ds = parse_vcf(Cohort::random(5, 20, 30).with_missing(5, 0.05).vcf().as_bytes()).unwrap().dataset;
    let mut view = View::new(&ds);
    view.apply(&ds, &Step::Select { rows: vec![0, 1, 2, 3], cols: vec![] }).unwrap();
    view.apply(&ds, &Step::AggregateRows { grouping: Grouping::Selection, allele_method: Default::default(), meta_method: Default::default() })
        .unwrap();

    let tile = Tile::from_view(&ds, &view, 0..4, 0..8).unwrap();
    let bytes = tile.encode();
    println!("header: {:02X?}", &bytes[..16]);
    println!("{} bytes for {}x{} cells, flags {:#04b}", bytes.len(), tile.n_rows, tile.n_cols, tile.flags());
    for r in 0..usize::from(tile.n_rows) {
        let codes: Vec<u8> = (0..usize::from(tile.n_cols)).map(|c| tile.code(r, c)).collect();
        let freqs = tile.freqs.as_ref().map(|f| f[r * usize::from(tile.n_cols)..][..usize::from(tile.n_cols)].to_vec());
        println!("row {r}: codes {codes:?} freqs {freqs:?}");
    }
    assert_eq!(Tile::decode(&bytes).unwrap(), tile);
    println!("truncated buffer -> {:?}", Tile::decode(&bytes[..10]).unwrap_err());
}
