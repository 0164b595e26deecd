//! Deterministic synthetic cohorts for tests, examples and benchmarks.
//!
//! Every generator takes a seed and produces the same data on every run.
//! A [`Cohort`] keeps its truth matrix so parsed results can be compared
//! against it; [`write_streaming_vcf`] writes arbitrarily large files
//! without holding anything in memory.

use std::fmt::Write as _;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::store::{Base, Genotype};

pub const CHROM: &str = "22";
pub const FIRST_POSITION: u64 = 16_050_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthVariant {
    pub chrom: String,
    pub position: u64,
    pub id: String,
    pub reference: Base,
    pub alt: Base,
}

/// Biallelic cohort with known genotypes, indexed `[subject][variant]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cohort {
    pub subjects: Vec<String>,
    pub variants: Vec<SynthVariant>,
    pub genotypes: Vec<Vec<Genotype>>,
    pub phased: bool,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_bases(rng: &mut impl Rng) -> (Base, Base) {
    let reference = Base::ALL[rng.gen_range(0..4)];
    let mut alt = Base::ALL[rng.gen_range(0..3)];
    if alt >= reference {
        alt = Base::ALL[alt.code() as usize + 1];
    }
    (reference, alt)
}

fn variant_sites(rng: &mut impl Rng, n: usize) -> Vec<SynthVariant> {
    let mut position = FIRST_POSITION;
    (0..n)
        .map(|v| {
            position += rng.gen_range(1..500);
            let (reference, alt) = random_bases(rng);
            SynthVariant { chrom: CHROM.into(), position, id: format!("rs{}", 100_000 + v), reference, alt }
        })
        .collect()
}

fn subject_ids(n: usize) -> Vec<String> {
    (0..n).map(|s| format!("HG{:05}", s + 1)).collect()
}

impl Cohort {
    /// Random phased cohort without missing calls. Each variant draws its
    /// alternate allele frequency uniformly from [0, 0.5).
    pub fn random(seed: u64, n_subjects: usize, n_variants: usize) -> Cohort {
        let mut rng = rng(seed);
        let variants = variant_sites(&mut rng, n_variants);
        let freqs: Vec<f64> = (0..n_variants).map(|_| rng.gen_range(0.0..0.5)).collect();
        let genotypes = (0..n_subjects)
            .map(|_| {
                variants
                    .iter()
                    .zip(&freqs)
                    .map(|(site, &f)| {
                        let mut allele = || if rng.gen_bool(f) { site.alt } else { site.reference };
                        Genotype::called(allele(), allele())
                    })
                    .collect()
            })
            .collect();
        Cohort { subjects: subject_ids(n_subjects), variants, genotypes, phased: true }
    }

    /// Cohort where variant `v` carries exactly `alt_counts[v]` alternate
    /// alleles among the `2 * n_subjects` alleles, at random positions.
    pub fn with_alt_counts(seed: u64, n_subjects: usize, alt_counts: &[usize]) -> Cohort {
        let mut rng = rng(seed);
        let variants = variant_sites(&mut rng, alt_counts.len());
        let mut genotypes = vec![Vec::with_capacity(alt_counts.len()); n_subjects];
        let mut slots: Vec<bool> = Vec::with_capacity(2 * n_subjects);
        for (site, &k) in variants.iter().zip(alt_counts) {
            assert!(k <= 2 * n_subjects, "more alternate alleles than slots");
            slots.clear();
            slots.extend((0..2 * n_subjects).map(|i| i < k));
            slots.shuffle(&mut rng);
            for (s, row) in genotypes.iter_mut().enumerate() {
                let pick = |alt: bool| if alt { site.alt } else { site.reference };
                row.push(Genotype::called(pick(slots[2 * s]), pick(slots[2 * s + 1])));
            }
        }
        Cohort { subjects: subject_ids(n_subjects), variants, genotypes, phased: true }
    }

    /// Blank out each allele independently with probability `rate`.
    pub fn with_missing(mut self, seed: u64, rate: f64) -> Cohort {
        let mut rng = rng(seed);
        for row in &mut self.genotypes {
            for g in row {
                if rng.gen_bool(rate) {
                    g.paternal = None;
                }
                if rng.gen_bool(rate) {
                    g.maternal = None;
                }
            }
        }
        self
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_variants(&self) -> usize {
        self.variants.len()
    }

    /// Alternate alleles at variant `v`.
    pub fn alt_count(&self, v: usize) -> usize {
        let alt = Some(self.variants[v].alt);
        self.genotypes.iter().map(|row| usize::from(row[v].paternal == alt) + usize::from(row[v].maternal == alt)).sum()
    }

    fn gt_field(&self, site: &SynthVariant, g: Genotype, out: &mut String) {
        let index = |a: Option<Base>| match a {
            None => '.',
            Some(b) if b == site.reference => '0',
            Some(_) => '1',
        };
        out.push(index(g.paternal));
        out.push(if self.phased { '|' } else { '/' });
        out.push(index(g.maternal));
    }

    pub fn write_vcf(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "##fileformat=VCFv4.2")?;
        writeln!(w, "##contig=<ID={CHROM}>")?;
        writeln!(w, "##FORMAT=<ID=GT,Number=1,Type=String,Description=\"Genotype\">")?;
        write!(w, "#CHROM\tPOS\tID\tREF\tALT\tQUAL\tFILTER\tINFO\tFORMAT")?;
        for s in &self.subjects {
            write!(w, "\t{s}")?;
        }
        writeln!(w)?;
        let mut line = String::new();
        for (v, site) in self.variants.iter().enumerate() {
            line.clear();
            let _ = write!(
                line,
                "{}\t{}\t{}\t{}\t{}\t.\tPASS\t.\tGT",
                site.chrom,
                site.position,
                site.id,
                site.reference.as_char(),
                site.alt.as_char()
            );
            for row in &self.genotypes {
                line.push('\t');
                self.gt_field(site, row[v], &mut line);
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn vcf(&self) -> String {
        let mut out = Vec::new();
        self.write_vcf(&mut out).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("generated VCF is ASCII")
    }

    /// `(haps, sample)` file contents. IMPUTE2 has no missing-allele
    /// encoding, so the cohort must be fully called.
    pub fn impute2(&self) -> (String, String) {
        let mut haps = String::new();
        for (v, site) in self.variants.iter().enumerate() {
            let _ = write!(
                haps,
                "{} {} {} {} {}",
                site.chrom,
                site.id,
                site.position,
                site.reference.as_char(),
                site.alt.as_char()
            );
            for row in &self.genotypes {
                for allele in [row[v].paternal, row[v].maternal] {
                    let allele = allele.expect("IMPUTE2 output needs fully called genotypes");
                    haps.push_str(if allele == site.reference { " 0" } else { " 1" });
                }
            }
            haps.push('\n');
        }
        let mut samples = String::from("ID_1 ID_2 missing\n0 0 0\n");
        for s in &self.subjects {
            let _ = writeln!(samples, "{s} {s} 0");
        }
        (haps, samples)
    }
}

/// A cohort split into populations with population-specific variants.
#[derive(Debug, Clone)]
pub struct PlantedCohort {
    pub cohort: Cohort,
    pub population_names: Vec<String>,
    /// Population index of every subject.
    pub population_of: Vec<usize>,
    /// For every variant: the population in which it is planted, if any.
    pub planted: Vec<Option<usize>>,
    /// Variants with at most one alternate allele in the whole cohort.
    pub rare: Vec<bool>,
}

impl PlantedCohort {
    /// Subject meta table text with a categorical `Population` column and a
    /// numerical `Age` column.
    pub fn subject_meta(&self) -> String {
        let mut out = String::from("ID\tPopulation\tAge\nID\tcategorical\tnumerical\n");
        for (s, id) in self.cohort.subjects.iter().enumerate() {
            let age = 20 + (s * 7) % 50;
            let _ = writeln!(out, "{id}\t{}\t{age}", self.population_names[self.population_of[s]]);
        }
        out
    }

    /// Variant meta table text with a categorical `Class` row.
    pub fn variant_meta(&self) -> String {
        let mut out = String::from("ID\tClass\nID\tcategorical\n");
        for (v, site) in self.cohort.variants.iter().enumerate() {
            let class = match (self.planted[v], self.rare[v]) {
                (Some(_), _) => "planted",
                (None, true) => "rare",
                (None, false) => "common",
            };
            let _ = writeln!(out, "{}\t{class}", site.id);
        }
        out
    }
}

/// Generate `populations` (name, size) with `n_variants` sites:
///
/// * planted: 90% of the owning population is homozygous alternate, nobody
///   else carries the alternate allele;
/// * rare: zero or one alternate allele in the whole cohort;
/// * common: every allele is alternate with probability 0.1.
///
/// Planted and rare sites each make up roughly a fifth of the variants.
/// Subjects are interleaved across populations so that input order does
/// not reveal the grouping.
pub fn planted_populations(seed: u64, populations: &[(&str, usize)], n_variants: usize) -> PlantedCohort {
    let mut rng = rng(seed);
    let n_subjects: usize = populations.iter().map(|p| p.1).sum();
    let mut population_of: Vec<usize> =
        populations.iter().enumerate().flat_map(|(p, &(_, n))| std::iter::repeat_n(p, n)).collect();
    population_of.shuffle(&mut rng);

    let variants = variant_sites(&mut rng, n_variants);
    let mut planted = Vec::with_capacity(n_variants);
    let mut rare = Vec::with_capacity(n_variants);
    let mut genotypes = vec![Vec::with_capacity(n_variants); n_subjects];
    for site in &variants {
        let roll: f64 = rng.gen();
        let kind = if roll < 0.2 { 0 } else if roll < 0.4 { 1 } else { 2 };
        let owner = rng.gen_range(0..populations.len());
        let lone_carrier = (kind == 1 && rng.gen_bool(0.5)).then(|| rng.gen_range(0..2 * n_subjects));
        let mut owner_seen = 0usize;
        let owner_size = populations[owner].1;
        let owner_carriers = (owner_size * 9).div_ceil(10);
        for (s, row) in genotypes.iter_mut().enumerate() {
            let g = match kind {
                0 if population_of[s] == owner => {
                    owner_seen += 1;
                    if owner_seen <= owner_carriers {
                        Genotype::called(site.alt, site.alt)
                    } else {
                        Genotype::called(site.reference, site.reference)
                    }
                }
                0 => Genotype::called(site.reference, site.reference),
                1 => {
                    let pick = |slot: usize| if lone_carrier == Some(2 * s + slot) { site.alt } else { site.reference };
                    Genotype::called(pick(0), pick(1))
                }
                _ => {
                    let mut allele = || if rng.gen_bool(0.1) { site.alt } else { site.reference };
                    Genotype::called(allele(), allele())
                }
            };
            row.push(g);
        }
        planted.push((kind == 0).then_some(owner));
        rare.push(kind == 1);
    }
    PlantedCohort {
        cohort: Cohort { subjects: subject_ids(n_subjects), variants, genotypes, phased: true },
        population_names: populations.iter().map(|p| p.0.to_string()).collect(),
        population_of,
        planted,
        rare,
    }
}

/// Write a phased VCF of `n_subjects x n_variants` random calls straight to
/// `w`, without materializing the matrix. Returns the number of bytes
/// written.
pub fn write_streaming_vcf(mut w: impl Write, seed: u64, n_subjects: usize, n_variants: usize) -> io::Result<u64> {
    let mut rng = rng(seed);
    let mut written = 0u64;
    let mut line = String::with_capacity(64 + 4 * n_subjects);
    line.push_str("##fileformat=VCFv4.2\n#CHROM\tPOS\tID\tREF\tALT\tQUAL\tFILTER\tINFO\tFORMAT");
    for id in subject_ids(n_subjects) {
        line.push('\t');
        line.push_str(&id);
    }
    line.push('\n');
    w.write_all(line.as_bytes())?;
    written += line.len() as u64;

    let mut position = FIRST_POSITION;
    for v in 0..n_variants {
        position += rng.gen_range(1..500);
        let (reference, alt) = random_bases(&mut rng);
        line.clear();
        let _ = write!(
            line,
            "{CHROM}\t{position}\trs{}\t{}\t{}\t.\tPASS\t.\tGT",
            100_000 + v,
            reference.as_char(),
            alt.as_char()
        );
        let mut bits = 0u64;
        for s in 0..n_subjects {
            if s % 32 == 0 {
                bits = rng.next_u64();
            }
            let pair = (bits >> (2 * (s % 32))) & 0b11;
            line.push('\t');
            line.push(if pair & 1 == 1 { '1' } else { '0' });
            line.push('|');
            line.push(if pair & 2 == 2 { '1' } else { '0' });
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
        written += line.len() as u64;
    }
    Ok(written)
}
