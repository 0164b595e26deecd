//! Pack a random 1000 x 40000 genotype matrix and report its size against a
//! naive two-characters-per-genotype layout.

use hapview::store::{Base, Genotype, PackedHaplotypeMatrix};

fn main() {
    let (subjects, variants) = (1000, 40_000);
    let matrix = PackedHaplotypeMatrix::from_fn(subjects, variants, true, |s, v| {
        let mix = (s * 31 + v * 17) % 16;
        Genotype::called(Base::ALL[mix & 3], Base::ALL[mix >> 2])
    });
    let dense = subjects * variants * 2 * std::mem::size_of::<u16>();
    println!("packed plane: {} bytes", matrix.plane_bytes());
    println!("dense chars:  {dense} bytes ({}x larger)", dense / matrix.plane_bytes());

    let window = matrix.window(0..3, 0..8).expect("window in range");
    for row in 0..3 {
        let cells: Vec<String> = (0..8)
            .map(|col| {
                let g = window.get(row, col);
                let c = |b: Option<Base>| b.map_or('.', Base::as_char);
                format!("{}|{}", c(g.paternal), c(g.maternal))
            })
            .collect();
        println!("subject {row}: {}", cells.join(" "));
    }
}
