//! IMPUTE2 / SHAPEIT haplotype files.
//!
//! Each hap line is `chrom id position alleleA alleleB` followed by `2N`
//! indicators (`0` = alleleA, `1` = alleleB); columns `2k` and `2k+1` are
//! subject `k`'s paternal and maternal haplotypes. The sample stream either
//! lists one ID per line or is a SHAPEIT `.sample` file (two header lines
//! starting with `ID_1`; the `ID_2` column names the subject).

use std::io::BufRead;

use crate::dataset::{AltBases, Dataset, SubjectTable, VariantTableBuilder};
use crate::ingest::{parse_u64, utf8, IngestError, Lines, ParseReport, Parsed};
use crate::store::{Base, Genotype, MatrixBuilder};

fn parse_samples<R: BufRead>(reader: R) -> Result<SubjectTable, IngestError> {
    let mut lines = Lines::new(reader);
    let mut ids = Vec::new();
    let mut shapeit = false;
    while let Some((line_no, line)) = lines.next_line()? {
        let text = utf8(line_no, line)?;
        let mut tokens = text.split_ascii_whitespace();
        let Some(first) = tokens.next() else { continue };
        if ids.is_empty() && !shapeit && first == "ID_1" {
            shapeit = true;
            // The second header line holds column types.
            lines.next_line()?;
            continue;
        }
        let id = if shapeit { tokens.next().unwrap_or(first) } else { first };
        ids.push(id.to_string());
    }
    SubjectTable::new(ids).map_err(|dup| IngestError::MalformedHeader(format!("duplicate sample {dup:?}")))
}

/// Parse a hap stream against its sample list. The result is always phased.
pub fn parse_impute2<H: BufRead, S: BufRead>(haps: H, samples: S) -> Result<Parsed, IngestError> {
    let subjects = parse_samples(samples)?;
    let n_subjects = subjects.len();
    let mut matrix = MatrixBuilder::new(n_subjects);
    let mut variants = VariantTableBuilder::new();
    let mut report = ParseReport::default();
    let mut column = Vec::with_capacity(n_subjects);

    let mut lines = Lines::new(haps);
    while let Some((line_no, line)) = lines.next_line()? {
        let tokens: Vec<&[u8]> = line.split(|b| b.is_ascii_whitespace()).filter(|t| !t.is_empty()).collect();
        if tokens.is_empty() {
            continue;
        }
        report.records += 1;
        let expected = 5 + 2 * n_subjects;
        if tokens.len() != expected {
            let indicators = tokens.len().saturating_sub(5);
            if report.records == 1 && tokens.len() >= 5 && indicators.is_multiple_of(2) {
                return Err(IngestError::DimensionMismatch { expected: n_subjects, found: indicators / 2 });
            }
            return Err(IngestError::record(
                line_no,
                format!("{} tokens, expected {expected} for {n_subjects} samples", tokens.len()),
            ));
        }

        let allele = |t: &[u8]| match t {
            [b] => Base::from_ascii(*b),
            _ => None,
        };
        let (Some(allele_a), Some(allele_b)) = (allele(tokens[3]), allele(tokens[4])) else {
            report.skipped_non_snv += 1;
            continue;
        };

        column.clear();
        for pair in tokens[5..].chunks_exact(2) {
            let decode = |t: &[u8]| match t {
                b"0" => Ok(allele_a),
                b"1" => Ok(allele_b),
                other => Err(IngestError::record(
                    line_no,
                    format!("haplotype indicator {:?} is not 0 or 1", String::from_utf8_lossy(other)),
                )),
            };
            let paternal = decode(pair[0])?;
            let maternal = decode(pair[1])?;
            column.push(Genotype::called(paternal, maternal));
        }

        let chrom = utf8(line_no, tokens[0])?;
        let id = match tokens[1] {
            b"." | b"---" => None,
            raw => Some(utf8(line_no, raw)?),
        };
        let position = parse_u64(line_no, "position", tokens[2])?;
        let alts = AltBases::from_slice(&[allele_b]).expect("one alternate");
        variants
            .push(chrom, position, id, Some(allele_a), alts)
            .map_err(|e| IngestError::from_push(line_no, e))?;
        matrix.push_variant(&column).expect("column sized to subject count");
        report.retained += 1;
    }

    report.renamed_ids = variants.renamed();
    let dataset = Dataset::new(matrix.seal(true), subjects, variants.finish())?;
    Ok(Parsed { dataset, report })
}
