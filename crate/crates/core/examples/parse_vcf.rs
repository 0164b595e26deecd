//! Parse a small VCF with an INDEL, a multi-allelic site and a missing call.

use hapview::ingest::parse_vcf;
use hapview::store::Base;

const VCF: &str = "\
##fileformat=VCFv4.2
#CHROM\tPOS\tID\tREF\tALT\tQUAL\tFILTER\tINFO\tFORMAT\tNA1\tNA2\tNA3
22\t100\trs1\tA\tG\t.\tPASS\t.\tGT\t0|1\t1|1\t0|0
22\t150\trs2\tAT\tA\t.\tPASS\t.\tGT\t0|1\t0|0\t0|0
22\t200\trs3\tC\tT,G\t.\tPASS\t.\tGT:DP\t2|1:9\t.|0:3\t0|0:7
";

fn main() {
    let parsed = parse_vcf(VCF.as_bytes()).expect("valid VCF");
    let ds = &parsed.dataset;
    println!("{}", serde_json::to_string_pretty(&parsed.summary()).unwrap());
    for v in 0..ds.n_variants() {
        let calls: Vec<String> = (0..ds.n_subjects())
            .map(|s| {
                let g = ds.matrix.get_genotype(s, v).unwrap();
                let c = |b: Option<Base>| b.map_or('.', Base::as_char);
                format!("{}|{}", c(g.paternal), c(g.maternal))
            })
            .collect();
        println!("{} {}: {}", ds.variants.id(v), ds.variants.position(v), calls.join(" "));
    }
}
