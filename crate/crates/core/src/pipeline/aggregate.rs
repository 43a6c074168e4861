use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::{ImageStatus, RunReport};
use crate::cluster::Domain;
use crate::domsize::{aggregate_stats, DomainSizeDistribution, DomainSizeSummary, GroupedDistribution};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub sample_id: String,
    pub domain: Domain,
    #[serde(flatten)]
    pub summary: DomainSizeSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateTable {
    pub rows: Vec<AggregateRow>,
    pub warnings: Vec<String>,
}

impl AggregateTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_id,domain,n_images,mean_nm,std_nm,max_nm,min_nm\n");
        for r in &self.rows {
            let s = &r.summary;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.sample_id,
                r.domain.name(),
                s.n_images,
                s.mean_nm,
                s.std_nm,
                s.max_nm,
                s.min_nm
            );
        }
        out
    }
}

fn read_distribution(dir: &Path, file: &str) -> Result<DomainSizeDistribution> {
    let path = dir.join(file);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    DomainSizeDistribution::from_csv(&text).map_err(|e| Error::format(&path, e.to_string()))
}

/// Per-sample summaries of mean domain size, for both domains, over every
/// successful image in the given run reports. Each report is paired with the
/// directory its artifact paths are relative to.
pub fn batch_aggregate(reports: &[(PathBuf, RunReport)]) -> Result<AggregateTable> {
    let mut warnings = Vec::new();
    // (sample, image name, domain) → distribution
    let mut loaded: Vec<(String, String, Domain, DomainSizeDistribution)> = Vec::new();
    for (dir, report) in reports {
        for img in &report.images {
            let name = img.image.display().to_string();
            if img.status != ImageStatus::Ok {
                warnings.push(format!(
                    "{name}: skipped during segmentation ({})",
                    img.reason.as_deref().unwrap_or("no reason recorded")
                ));
                continue;
            }
            let sample = img.sample_id.clone().unwrap_or_else(|| name.clone());
            for domain in Domain::BOTH {
                let key = format!("{}_sizes", domain.name());
                let file = img.artifacts.get(&key).ok_or_else(|| {
                    Error::input(format!("{name}: report lists no `{key}` artifact"))
                })?;
                loaded.push((sample.clone(), name.clone(), domain, read_distribution(dir, file)?));
            }
        }
    }
    let mut rows = Vec::new();
    for domain in Domain::BOTH {
        let items: Vec<GroupedDistribution<'_>> = loaded
            .iter()
            .filter(|(_, _, d, _)| *d == domain)
            .map(|(g, i, _, dist)| GroupedDistribution {
                group: g,
                image: i,
                distribution: dist,
            })
            .collect();
        if items.is_empty() {
            continue;
        }
        let stats = aggregate_stats(&items)?;
        warnings.extend(stats.warnings.into_iter().map(|w| format!("{}: {w}", domain.name())));
        rows.extend(stats.groups.into_iter().map(|(sample_id, summary)| AggregateRow {
            sample_id,
            domain,
            summary,
        }));
    }
    if rows.is_empty() {
        return Err(Error::input("no successfully segmented images to aggregate"));
    }
    rows.sort_by(|a, b| (&a.sample_id, a.domain as u8).cmp(&(&b.sample_id, b.domain as u8)));
    Ok(AggregateTable { rows, warnings })
}
