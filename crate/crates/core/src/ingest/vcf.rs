//! Minimal VCF reader: fixed columns, ALT/REF bases and the GT field.

use std::io::BufRead;

use crate::dataset::{AltBases, Dataset, SubjectTable, VariantTableBuilder};
use crate::ingest::{parse_u64, utf8, IngestError, Lines, ParseReport, Parsed};
use crate::store::{Base, Genotype, MatrixBuilder};

const FIXED_COLUMNS: usize = 8;

/// Single-base allele, or `None` for anything else (INDEL, symbolic, `N`).
fn single_base(field: &[u8]) -> Option<Base> {
    match field {
        [b] => Base::from_ascii(*b),
        _ => None,
    }
}

/// REF base and ALT bases, or `None` when the record is not a substitution.
fn snv_alleles(line: usize, reference: &[u8], alt: &[u8]) -> Result<Option<(Base, AltBases)>, IngestError> {
    let Some(reference) = single_base(reference) else {
        return Ok(None);
    };
    if alt == b"." {
        return Ok(Some((reference, AltBases::NONE)));
    }
    let mut alts = Vec::with_capacity(3);
    for a in alt.split(|&b| b == b',') {
        match single_base(a) {
            Some(base) => alts.push(base),
            None => return Ok(None),
        }
    }
    match AltBases::from_slice(&alts) {
        Some(alts) => Ok(Some((reference, alts))),
        None => Err(IngestError::record(line, "more than three alternate bases")),
    }
}

#[derive(Default)]
struct PhaseSeen {
    phased: bool,
    unphased: bool,
}

fn allele_index(
    line: usize,
    token: &[u8],
    reference: Base,
    alts: &AltBases,
) -> Result<Option<Base>, IngestError> {
    if token == b"." {
        return Ok(None);
    }
    let k = parse_u64(line, "GT allele index", token)? as usize;
    if k == 0 {
        return Ok(Some(reference));
    }
    alts.as_slice()
        .get(k - 1)
        .copied()
        .map(Some)
        .ok_or_else(|| IngestError::record(line, format!("GT allele {k} exceeds ALT count {}", alts.as_slice().len())))
}

fn parse_gt(
    line: usize,
    gt: &[u8],
    reference: Base,
    alts: &AltBases,
    seen: &mut PhaseSeen,
) -> Result<Genotype, IngestError> {
    let sep = gt.iter().position(|&b| b == b'|' || b == b'/');
    let Some(sep) = sep else {
        // Haploid call: second allele absent.
        return Ok(Genotype::new(allele_index(line, gt, reference, alts)?, None));
    };
    let (first, rest) = (&gt[..sep], &gt[sep + 1..]);
    if rest.iter().any(|&b| b == b'|' || b == b'/') {
        return Err(IngestError::record(line, "polyploid genotypes are not supported"));
    }
    let paternal = allele_index(line, first, reference, alts)?;
    let maternal = allele_index(line, rest, reference, alts)?;
    // Fully missing calls carry no phase information.
    if paternal.is_some() || maternal.is_some() {
        if gt[sep] == b'|' {
            seen.phased = true;
        } else {
            seen.unphased = true;
        }
    }
    Ok(Genotype::new(paternal, maternal))
}

/// Parse a text VCF. Non-SNV records are skipped and counted.
pub fn parse_vcf<R: BufRead>(reader: R) -> Result<Parsed, IngestError> {
    let mut lines = Lines::new(reader);

    let subjects = loop {
        let Some((line_no, line)) = lines.next_line()? else {
            return Err(IngestError::MalformedHeader("missing #CHROM header line".into()));
        };
        if line.starts_with(b"##") {
            continue;
        }
        if !line.starts_with(b"#CHROM") {
            return Err(IngestError::MalformedHeader(format!(
                "line {line_no}: expected #CHROM header before data"
            )));
        }
        let header = utf8(line_no, line).map_err(|_| IngestError::MalformedHeader("header is not UTF-8".into()))?;
        let columns: Vec<&str> = header.split('\t').collect();
        if columns.len() < FIXED_COLUMNS {
            return Err(IngestError::MalformedHeader(format!(
                "#CHROM line has {} columns, need at least {FIXED_COLUMNS}",
                columns.len()
            )));
        }
        if columns.len() > FIXED_COLUMNS && columns[FIXED_COLUMNS] != "FORMAT" {
            return Err(IngestError::MalformedHeader("ninth header column must be FORMAT".into()));
        }
        let ids: Vec<String> = columns.iter().skip(FIXED_COLUMNS + 1).map(|s| s.to_string()).collect();
        break SubjectTable::new(ids)
            .map_err(|dup| IngestError::MalformedHeader(format!("duplicate sample {dup:?}")))?;
    };

    let n_subjects = subjects.len();
    let expected_columns = if n_subjects == 0 { None } else { Some(FIXED_COLUMNS + 1 + n_subjects) };
    let mut matrix = MatrixBuilder::new(n_subjects);
    let mut variants = VariantTableBuilder::new();
    let mut report = ParseReport::default();
    let mut seen = PhaseSeen::default();
    let mut column = Vec::with_capacity(n_subjects);

    while let Some((line_no, line)) = lines.next_line()? {
        if line.is_empty() {
            continue;
        }
        report.records += 1;
        let fields: Vec<&[u8]> = line.split(|&b| b == b'\t').collect();
        let ok = match expected_columns {
            Some(n) => fields.len() == n,
            None => fields.len() == FIXED_COLUMNS || fields.len() == FIXED_COLUMNS + 1,
        };
        if !ok {
            return Err(IngestError::record(
                line_no,
                format!("{} columns, header declares {}", fields.len(), expected_columns.unwrap_or(FIXED_COLUMNS)),
            ));
        }

        let Some((reference, alts)) = snv_alleles(line_no, fields[3], fields[4])? else {
            report.skipped_non_snv += 1;
            continue;
        };
        let chrom = utf8(line_no, fields[0])?;
        let position = parse_u64(line_no, "POS", fields[1])?;
        let id = match fields[2] {
            b"." => None,
            raw => Some(utf8(line_no, raw)?),
        };

        column.clear();
        if n_subjects > 0 {
            let gt_index = fields[FIXED_COLUMNS]
                .split(|&b| b == b':')
                .position(|key| key == b"GT")
                .ok_or_else(|| IngestError::record(line_no, "FORMAT lacks GT"))?;
            for sample in &fields[FIXED_COLUMNS + 1..] {
                let gt = sample.split(|&b| b == b':').nth(gt_index).unwrap_or(b".");
                column.push(parse_gt(line_no, gt, reference, &alts, &mut seen)?);
            }
        }

        variants
            .push(chrom, position, id, Some(reference), alts)
            .map_err(|e| IngestError::from_push(line_no, e))?;
        matrix.push_variant(&column).expect("column sized to subject count");
        report.retained += 1;
    }

    report.mixed_phase = seen.phased && seen.unphased;
    report.renamed_ids = variants.renamed();
    let matrix = matrix.seal(!seen.unphased);
    let dataset = Dataset::new(matrix, subjects, variants.finish())?;
    Ok(Parsed { dataset, report })
}
