//! Render one view three ways (nucleotide PNG, genotype SVG with grid, bar
//! aggregation PNG) plus a downsampled overview.

use std::str::FromStr;

use hapview::ingest::parse_vcf;
use hapview::meta::{parse_meta, MetaKind};
use hapview::render::{
    encode_png, export_image, render_overview, AggStyle, Encoding, ImageFormat, Region, RenderOptions,
};
use hapview::synth::planted_populations;
use hapview::transform::{Step, ViewChain};

fn main() {
    let out = std::env::temp_dir().join("hapview-render");
    std::fs::create_dir_all(&out).unwrap();
    let planted = planted_populations(3, &[("AFR", 12), ("EAS", 12), ("EUR", 12)], 90);
    let mut ds = parse_vcf(planted.cohort.vcf().as_bytes()).unwrap().dataset;
    ds.attach_meta(MetaKind::Subject, parse_meta(planted.subject_meta().as_bytes(), MetaKind::Subject, "pop").unwrap())
        .unwrap();

    let (sorted, _) = ViewChain::new([Step::SortRows { column: "Population".into() }]).derive(&ds).unwrap();
    let plain = RenderOptions::default();
    let genotype = RenderOptions { encoding: Encoding::Genotype, cell_width: 6, cell_height: 6, show_grid: true, ..plain.clone() };
    for (name, opts, format) in [("nucleotide.png", &plain, "png"), ("genotype.svg", &genotype, "svg")] {
        let bytes = export_image(&ds, &sorted, opts, ImageFormat::from_str(format).unwrap(), &Region::Full).unwrap();
        std::fs::write(out.join(name), &bytes).unwrap();
        println!("{name}: {} bytes", bytes.len());
    }

    let (grouped, _) = ViewChain::from_json(
        r#"{"steps":[{"op":"sort_rows","column":"Population"},
                     {"op":"aggregate_rows","grouping":{"column":"Population"}}]}"#,
    )
    .unwrap()
    .derive(&ds)
    .unwrap();
    let bars = RenderOptions { agg_style: AggStyle::Bar, cell_width: 3, cell_height: 24, ..plain.clone() };
    let bytes = export_image(&ds, &grouped, &bars, ImageFormat::Png, &Region::Full).unwrap();
    std::fs::write(out.join("bars.png"), &bytes).unwrap();
    println!("bars.png: {} bytes", bytes.len());

    let overview = render_overview(&ds, &sorted, &plain, 40, 12).unwrap();
    std::fs::write(out.join("overview.png"), encode_png(&overview)).unwrap();
    println!("overview: {}x{} px; files in {}", overview.width, overview.height, out.display());
}
