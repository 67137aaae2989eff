//! Distribution comparison: width-10 histograms, KL divergence, skewness,
//! Mann-Whitney U, and per-intervention Pearson/Spearman correlation.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::experiment::TrialRecord;
use crate::wizard::CATALOG_SIZE;

pub const BIN_WIDTH: f64 = 10.0;

/// Pseudo-count added to every bin when the reference has an empty bin.
pub const KL_PSEUDO_COUNT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// `[0, 100]`, 10 bins.
    Preference,
    /// `[-100, 100]`, 20 bins.
    Shift,
}

impl Domain {
    pub fn lo(self) -> f64 {
        match self {
            Domain::Preference => 0.0,
            Domain::Shift => -100.0,
        }
    }

    pub fn hi(self) -> f64 {
        100.0
    }

    pub fn bins(self) -> usize {
        ((self.hi() - self.lo()) / BIN_WIDTH) as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Preference => "preference",
            Domain::Shift => "shift",
        }
    }

    /// Bin for `x`: left-closed, with the domain maximum in the top bin.
    pub fn bin_of(self, x: f64) -> Result<usize> {
        if !(self.lo()..=self.hi()).contains(&x) {
            return Err(Error::Data(format!(
                "sample {x} outside {} domain [{}, {}]",
                self.as_str(),
                self.lo(),
                self.hi()
            )));
        }
        let i = ((x - self.lo()) / BIN_WIDTH).floor() as usize;
        Ok(i.min(self.bins() - 1))
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "preference" => Ok(Domain::Preference),
            "shift" => Ok(Domain::Shift),
            _ => Err(Error::Data(format!("unknown domain {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    domain: Domain,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn empty(domain: Domain) -> Self {
        Self {
            domain,
            counts: vec![0; domain.bins()],
        }
    }

    pub fn from_counts(domain: Domain, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != domain.bins() {
            return Err(Error::Data(format!(
                "{domain} histogram needs {} bins, got {}",
                domain.bins(),
                counts.len()
            )));
        }
        Ok(Self { domain, counts })
    }

    /// Equal count in every bin.
    pub fn uniform(domain: Domain, per_bin: u64) -> Self {
        Self {
            domain,
            counts: vec![per_bin; domain.bins()],
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_lo(&self, i: usize) -> f64 {
        self.domain.lo() + BIN_WIDTH * i as f64
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        self.bin_lo(i) + BIN_WIDTH / 2.0
    }

    pub fn add(&mut self, x: f64) -> Result<()> {
        let i = self.domain.bin_of(x)?;
        self.counts[i] += 1;
        Ok(())
    }

    /// Each count expanded into copies of its bin midpoint.
    pub fn midpoint_samples(&self) -> Vec<f64> {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(self.midpoint(i), c as usize))
            .collect()
    }
}

pub fn discretize(samples: &[f64], domain: Domain) -> Result<Histogram> {
    let mut h = Histogram::empty(domain);
    for &x in samples {
        h.add(x)?;
    }
    Ok(h)
}

/// `KL(p ‖ q)` in nats.
///
/// When `q` has an empty bin every bin of both histograms gets
/// [`KL_PSEUDO_COUNT`] added before normalizing; otherwise raw frequencies are
/// used and bins with `p = 0` contribute nothing.
pub fn kl_divergence(p: &Histogram, q: &Histogram) -> Result<f64> {
    if p.domain != q.domain {
        return Err(Error::Usage(format!(
            "KL between {} and {} histograms",
            p.domain, q.domain
        )));
    }
    if p.total() == 0 || q.total() == 0 {
        return Err(Error::InsufficientData("KL of an empty histogram".into()));
    }
    let pseudo = if q.counts.contains(&0) { KL_PSEUDO_COUNT } else { 0.0 };
    let k = p.counts.len() as f64;
    let p_total = p.total() as f64 + pseudo * k;
    let q_total = q.total() as f64 + pseudo * k;
    let kl = p
        .counts
        .iter()
        .zip(&q.counts)
        .map(|(&pc, &qc)| {
            let pi = (pc as f64 + pseudo) / p_total;
            let qi = (qc as f64 + pseudo) / q_total;
            if pi == 0.0 {
                0.0
            } else {
                pi * (pi / qi).ln()
            }
        })
        .sum::<f64>();
    Ok(kl.max(0.0))
}

/// Biased standardized third moment `m3 / m2^{3/2}` over bin midpoints.
pub fn skewness(hist: &Histogram) -> Result<f64> {
    let n = hist.total();
    if n < 3 {
        return Err(Error::InsufficientData(format!("skewness needs 3 samples, got {n}")));
    }
    let n = n as f64;
    let weighted = || hist.counts.iter().enumerate().map(|(i, &c)| (hist.midpoint(i), c as f64));
    let mean = weighted().map(|(x, c)| x * c).sum::<f64>() / n;
    let (m2, m3) = weighted().fold((0.0, 0.0), |(m2, m3), (x, c)| {
        let d = x - mean;
        (m2 + c * d * d, m3 + c * d * d * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    if m2 <= 0.0 {
        return Err(Error::Undefined("skewness of a zero-variance histogram".into()));
    }
    Ok(m3 / m2.powf(1.5))
}

/// Midranks (1-based) of `xs`.
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Every value in both samples was identical; `p` is 1.
    pub degenerate: bool,
}

/// Two-sided Mann-Whitney U with midranks, tie-corrected variance, and
/// continuity correction under the normal approximation.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    const MIN_SAMPLE: usize = 8;
    if a.len() < MIN_SAMPLE || b.len() < MIN_SAMPLE {
        return Err(Error::InsufficientData(format!(
            "Mann-Whitney needs at least {MIN_SAMPLE} samples per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let combined: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&combined);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let rank_sum_a: f64 = ranks[..a.len()].iter().sum();
    let u = rank_sum_a - na * (na + 1.0) / 2.0;
    let mu = na * nb / 2.0;

    let mut sorted = combined.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    for group in sorted.chunk_by(|x, y| x == y) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return Ok(MannWhitney {
            u,
            p: 1.0,
            degenerate: true,
        });
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    let p = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok(MannWhitney {
        u,
        p,
        degenerate: false,
    })
}

fn check_paired(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Usage(format!(
            "correlation inputs differ in length: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation needs 3 pairs, got {}",
            xs.len()
        )));
    }
    Ok(())
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_paired(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with a constant input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation of midranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_paired(xs, ys)?;
    pearson(&midranks(xs), &midranks(ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectCell {
    pub mean_shift: f64,
    pub count: u64,
}

/// Mean shift per static intervention (index 1..=35) over valid trials;
/// `None` where no trial used that intervention.
pub fn per_intervention_means<'a, I>(records: I) -> Vec<Option<EffectCell>>
where
    I: IntoIterator<Item = &'a TrialRecord>,
{
    let mut sums = vec![(0.0, 0u64); CATALOG_SIZE];
    for r in records {
        if let (Some(i), Some(shift)) = (r.static_index, r.valid_shift()) {
            if let Some(cell) = sums.get_mut(usize::from(i).wrapping_sub(1)) {
                cell.0 += f64::from(shift);
                cell.1 += 1;
            }
        }
    }
    sums.into_iter()
        .map(|(s, n)| {
            (n > 0).then(|| EffectCell {
                mean_shift: s / n as f64,
                count: n,
            })
        })
        .collect()
}

/// Per-intervention effects for a reference cohort and a simulated one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionEffectTable {
    pub reference: Vec<Option<EffectCell>>,
    pub simulated: Vec<Option<EffectCell>>,
}

impl InterventionEffectTable {
    /// Mean shifts at indices present in both cohorts, as `(reference, simulated)`.
    pub fn paired(&self) -> (Vec<f64>, Vec<f64>) {
        self.reference
            .iter()
            .zip(&self.simulated)
            .filter_map(|(r, s)| Some((r.as_ref()?.mean_shift, s.as_ref()?.mean_shift)))
            .unzip()
    }

    pub fn pearson(&self) -> Result<f64> {
        let (r, s) = self.paired();
        pearson(&r, &s)
    }

    pub fn spearman(&self) -> Result<f64> {
        let (r, s) = self.paired();
        spearman(&r, &s)
    }
}

/// Reference distributions, usually from the human survey.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceData {
    pub preference: Option<Histogram>,
    pub shift: Option<Histogram>,
    /// Mean shift per intervention index; `None` if the reference has none.
    pub intervention_means: Option<Vec<Option<EffectCell>>>,
}

impl ReferenceData {
    /// Parses `domain,bin_lo,count` rows.
    ///
    /// `domain` is `preference` or `shift` for histogram bins. Rows with
    /// domain `intervention` carry an intervention index in the second
    /// column and its mean shift in the third.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = ReferenceData::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("domain")) {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let [domain, lo, count] = cols[..] else {
                return Err(Error::Data(format!("reference line {}: expected 3 columns", i + 1)));
            };
            let bad = |what: &str| Error::Data(format!("reference line {}: bad {what}", i + 1));
            if domain == "intervention" {
                let index: u8 = lo.parse().map_err(|_| bad("intervention index"))?;
                let mean: f64 = count.parse().map_err(|_| bad("mean shift"))?;
                if !(1..=CATALOG_SIZE as u8).contains(&index) || !mean.is_finite() {
                    return Err(bad("intervention row"));
                }
                let cells = out.intervention_means.get_or_insert_with(|| vec![None; CATALOG_SIZE]);
                cells[usize::from(index) - 1] = Some(EffectCell {
                    mean_shift: mean,
                    count: 0,
                });
                continue;
            }
            let domain: Domain = domain.parse()?;
            let lo: f64 = lo.parse().map_err(|_| bad("bin_lo"))?;
            let count: u64 = count.parse().map_err(|_| bad("count"))?;
            let slot = match domain {
                Domain::Preference => &mut out.preference,
                Domain::Shift => &mut out.shift,
            };
            let hist = slot.get_or_insert_with(|| Histogram::empty(domain));
            let offset = (lo - domain.lo()) / BIN_WIDTH;
            if offset.fract() != 0.0 || offset < 0.0 || offset as usize >= domain.bins() {
                return Err(bad("bin_lo"));
            }
            hist.counts[offset as usize] += count;
        }
        Ok(out)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Reference built from a run's own valid trials.
    pub fn from_records(records: &[TrialRecord]) -> Result<Self> {
        let (pre, shift) = valid_samples(records);
        let means = per_intervention_means(records);
        Ok(Self {
            preference: Some(discretize(&pre, Domain::Preference)?),
            shift: Some(discretize(&shift, Domain::Shift)?),
            intervention_means: means.iter().any(Option::is_some).then_some(means),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("domain,bin_lo,count\n");
        for h in [&self.preference, &self.shift].into_iter().flatten() {
            for (i, c) in h.counts.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", h.domain, h.bin_lo(i), c));
            }
        }
        if let Some(cells) = &self.intervention_means {
            for (i, cell) in cells.iter().enumerate() {
                if let Some(c) = cell {
                    out.push_str(&format!("intervention,{},{}\n", i + 1, c.mean_shift));
                }
            }
        }
        out
    }
}

/// Pre-intervention preferences and shifts of valid trials.
pub fn valid_samples(records: &[TrialRecord]) -> (Vec<f64>, Vec<f64>) {
    records
        .iter()
        .filter_map(|r| Some((f64::from(r.pre?), f64::from(r.valid_shift()?))))
        .unzip()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Panel {
    Shift,
    InitialPreference,
}

impl Panel {
    pub fn as_str(self) -> &'static str {
        match self {
            Panel::Shift => "shift",
            Panel::InitialPreference => "initial_preference",
        }
    }
}

/// One row of the comparison table. Cells that cannot be computed are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub panel: Panel,
    pub setting: String,
    pub kl_s: Option<f64>,
    pub kl_u: Option<f64>,
    pub skew: Option<f64>,
    pub p_value: Option<f64>,
    pub c_p: Option<f64>,
    pub c_s: Option<f64>,
}

impl ReportRow {
    pub const MEASURES: [&'static str; 6] = ["KL^S", "KL^U", "Skew", "p-value", "c^P", "c^S"];

    pub fn measures(&self) -> [Option<f64>; 6] {
        [self.kl_s, self.kl_u, self.skew, self.p_value, self.c_p, self.c_s]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
    /// Reference pieces that were needed but not supplied.
    pub missing_reference: Vec<String>,
}

impl ComparisonReport {
    pub fn to_table(&self) -> String {
        let mut out = format!("panel,setting,{}\n", ReportRow::MEASURES.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.measures().iter().map(|m| fmt_cell(*m)).collect();
            out.push_str(&format!("{},{},{}\n", r.panel.as_str(), r.setting, cells.join(",")));
        }
        out
    }

    /// Long format: `panel,setting,measure,value`, absent cells omitted.
    pub fn to_long(&self) -> String {
        let mut out = String::from("panel,setting,measure,value\n");
        for r in &self.rows {
            for (name, m) in ReportRow::MEASURES.iter().zip(r.measures()) {
                if let Some(v) = m {
                    out.push_str(&format!("{},{},{},{}\n", r.panel.as_str(), r.setting, name, v));
                }
            }
        }
        out
    }
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Builds the shift and initial-preference rows for one setting.
///
/// The rank test is run on bin midpoints of both sides, since the reference
/// is only available as a histogram.
pub fn comparison_report(
    setting: &str,
    records: &[TrialRecord],
    reference: Option<&ReferenceData>,
) -> Result<ComparisonReport> {
    let (pre, shift) = valid_samples(records);
    if pre.is_empty() {
        return Err(Error::InsufficientData("no valid trials to compare".into()));
    }
    let mut missing = Vec::new();
    let mut rows = Vec::new();

    for (panel, domain, samples) in [
        (Panel::Shift, Domain::Shift, &shift),
        (Panel::InitialPreference, Domain::Preference, &pre),
    ] {
        let hist = discretize(samples, domain)?;
        let reference_hist = reference.and_then(|r| match domain {
            Domain::Preference => r.preference.as_ref(),
            Domain::Shift => r.shift.as_ref(),
        });
        let (kl_s, p_value) = match reference_hist {
            Some(rh) => (
                kl_divergence(&hist, rh).ok(),
                mann_whitney_u(&hist.midpoint_samples(), &rh.midpoint_samples())
                    .ok()
                    .map(|m| m.p),
            ),
            None => {
                missing.push(format!("{domain} histogram"));
                (None, None)
            }
        };
        let kl_u = kl_divergence(&hist, &Histogram::uniform(domain, 1)).ok();
        let skew = skewness(&hist).ok();

        let (c_p, c_s) = if panel == Panel::Shift {
            match reference.and_then(|r| r.intervention_means.clone()) {
                Some(reference_means) => {
                    let table = InterventionEffectTable {
                        reference: reference_means,
                        simulated: per_intervention_means(records),
                    };
                    (table.pearson().ok(), table.spearman().ok())
                }
                None => {
                    missing.push("intervention means".into());
                    (None, None)
                }
            }
        } else {
            (None, None)
        };

        rows.push(ReportRow {
            panel,
            setting: setting.to_string(),
            kl_s,
            kl_u,
            skew,
            p_value,
            c_p,
            c_s,
        });
    }
    Ok(ComparisonReport {
        rows,
        missing_reference: missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_edges() {
        let h = discretize(&[0.0, 9.0, 10.0, 100.0], Domain::Preference).unwrap();
        assert_eq!(h.counts()[0], 2);
        assert_eq!(h.counts()[1], 1);
        assert_eq!(h.counts()[9], 1);
        assert_eq!(h.total(), 4);

        let h = discretize(&[-100.0, 0.0, 99.0], Domain::Shift).unwrap();
        assert_eq!(h.counts().len(), 20);
        assert_eq!((h.counts()[0], h.counts()[10], h.counts()[19]), (1, 1, 1));

        let err = discretize(&[50.0, 100.5], Domain::Preference).unwrap_err();
        assert!(err.to_string().contains("100.5"));
        assert!(discretize(&[-1.0], Domain::Preference).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = Histogram::from_counts(Domain::Preference, vec![3, 1, 4, 1, 5, 9, 2, 6, 5, 3]).unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);

        let mut point = vec![0; 20];
        point[0] = 100;
        let point = Histogram::from_counts(Domain::Shift, point).unwrap();
        let uniform = Histogram::uniform(Domain::Shift, 5);
        let kl = kl_divergence(&point, &uniform).unwrap();
        assert!((kl - 20f64.ln()).abs() < 0.01, "{kl}");

        let skewed = Histogram::from_counts(Domain::Preference, vec![20, 10, 5, 2, 1, 1, 1, 1, 1, 1]).unwrap();
        let flat = Histogram::uniform(Domain::Preference, 4);
        let forward = kl_divergence(&skewed, &flat).unwrap();
        let backward = kl_divergence(&flat, &skewed).unwrap();
        assert!((forward - backward).abs() > 1e-3);

        assert!(matches!(kl_divergence(&p, &uniform), Err(Error::Usage(_))));
    }

    #[test]
    fn kl_smooths_empty_reference_bins() {
        let p = Histogram::from_counts(Domain::Preference, vec![1; 10]).unwrap();
        let mut qc = vec![2; 10];
        qc[3] = 0;
        let q = Histogram::from_counts(Domain::Preference, qc).unwrap();
        let kl = kl_divergence(&p, &q).unwrap();
        assert!(kl.is_finite() && kl > 0.0);
    }

    #[test]
    fn skew_examples() {
        let sym = Histogram::from_counts(Domain::Preference, vec![1, 2, 3, 4, 5, 5, 4, 3, 2, 1]).unwrap();
        assert!(skewness(&sym).unwrap().abs() < 1e-12);
        let high = Histogram::from_counts(Domain::Preference, vec![1, 1, 1, 2, 3, 5, 8, 13, 21, 30]).unwrap();
        assert!(skewness(&high).unwrap() < 0.0);
        let flat = Histogram::from_counts(Domain::Preference, vec![0, 0, 5, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        assert!(matches!(skewness(&flat), Err(Error::Undefined(_))));
        let tiny = Histogram::from_counts(Domain::Preference, vec![1, 1, 0, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        assert!(matches!(skewness(&tiny), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(midranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn mann_whitney_examples() {
        let a: Vec<f64> = (1..=20).map(f64::from).collect();
        let b: Vec<f64> = (21..=40).map(f64::from).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.u, 0.0);
        assert!(r.p < 0.001);

        let same = mann_whitney_u(&a, &a).unwrap();
        assert!(same.p >= 0.99);

        let c = vec![5.0; 10];
        let d = mann_whitney_u(&c, &c).unwrap();
        assert!(d.degenerate && d.p == 1.0);

        assert!(matches!(mann_whitney_u(&a[..7], &b), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn correlation_examples() {
        let xs: Vec<f64> = vec![1.0, 4.0, 2.0, 8.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        let rev: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((spearman(&xs, &rev).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(pearson(&xs, &[1.0; 5]), Err(Error::Undefined(_))));
        assert!(matches!(pearson(&xs, &ys[..4]), Err(Error::Usage(_))));
        assert!(matches!(spearman(&xs[..2], &ys[..2]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn reference_file_round_trip() {
        let text = "domain,bin_lo,count\npreference,0,3\npreference,90,7\nshift,-100,1\nshift,0,9\nintervention,21,4.5\n";
        let r = ReferenceData::parse(text).unwrap();
        assert_eq!(r.preference.as_ref().unwrap().counts()[9], 7);
        assert_eq!(r.shift.as_ref().unwrap().counts()[10], 9);
        assert_eq!(r.intervention_means.as_ref().unwrap()[20].unwrap().mean_shift, 4.5);
        let again = ReferenceData::parse(&r.to_csv()).unwrap();
        assert_eq!(again, r);
        assert!(ReferenceData::parse("shift,5,1\n").is_err());
        assert!(ReferenceData::parse("bogus,0,1\n").is_err());
    }
}
