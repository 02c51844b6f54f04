//! Feature panel ingestion, return-to-volatility labeling, and chronological splits.
//!
//! A panel holds one feature vector and one close price per (trading day,
//! ticker). Labeling ranks stocks at an anchor day by the return-to-volatility
//! ratio of the forward window, keeps the top and bottom `Q` percent, and
//! discards the ambiguous middle.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Per-(date, ticker) panel of feature vectors and close prices.
///
/// Dates are strictly increasing; tickers are kept in lexicographic order so
/// that loading is independent of file row order. Cells may be absent (a
/// ticker missing on a day).
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    feature_names: Vec<String>,
    /// Dense (T*M) cell presence flags.
    present: Vec<bool>,
    /// Dense (T*M) closes; only meaningful where `present`.
    closes: Vec<f64>,
    /// Dense (T*M*n) feature values; only meaningful where `present`.
    values: Vec<f64>,
}

impl FeaturePanel {
    /// Build a fully dense panel (every cell present). Used by generators.
    ///
    /// `closes[t * M + m]` and `values[(t * M + m) * n + j]` must cover every
    /// (date, ticker) pair.
    pub fn dense(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        feature_names: Vec<String>,
        closes: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let (t_len, m_len, n) = (dates.len(), tickers.len(), feature_names.len());
        if closes.len() != t_len * m_len || values.len() != t_len * m_len * n {
            return Err(Error::Data("dense panel arrays have wrong lengths".into()));
        }
        let panel = FeaturePanel {
            dates,
            tickers,
            feature_names,
            present: vec![true; t_len * m_len],
            closes,
            values,
        };
        panel.validate()?;
        Ok(panel)
    }

    fn validate(&self) -> Result<()> {
        for w in self.dates.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Data(format!(
                    "dates not strictly increasing at {}",
                    w[1]
                )));
            }
        }
        {
            let mut seen = std::collections::HashSet::new();
            for name in &self.feature_names {
                if !seen.insert(name) {
                    return Err(Error::Schema(format!("duplicate feature column '{name}'")));
                }
            }
        }
        for (idx, &p) in self.present.iter().enumerate() {
            if !p {
                continue;
            }
            let (t, m) = (idx / self.tickers.len(), idx % self.tickers.len());
            let close = self.closes[idx];
            if !(close.is_finite() && close > 0.0) {
                return Err(Error::Data(format!(
                    "non-positive or non-finite close {} for ({}, {})",
                    close, self.dates[t], self.tickers[m]
                )));
            }
            let n = self.feature_names.len();
            for j in 0..n {
                let v = self.values[idx * n + j];
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite value in column '{}' for ({}, {})",
                        self.feature_names[j], self.dates[t], self.tickers[m]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    #[inline]
    fn cell(&self, t: usize, m: usize) -> usize {
        t * self.tickers.len() + m
    }

    /// Feature vector at (day t, ticker m), if present.
    pub fn features_at(&self, t: usize, m: usize) -> Option<&[f64]> {
        let idx = self.cell(t, m);
        if !self.present[idx] {
            return None;
        }
        let n = self.feature_names.len();
        Some(&self.values[idx * n..(idx + 1) * n])
    }

    /// Close price at (day t, ticker m), if present.
    pub fn close_at(&self, t: usize, m: usize) -> Option<f64> {
        let idx = self.cell(t, m);
        self.present[idx].then(|| self.closes[idx])
    }

    /// Return-to-volatility ratio of ticker `m` over the forward window
    /// `[anchor+1, anchor+window]`: cumulative simple return divided by the
    /// sample standard deviation (ddof = 1) of the window's daily simple
    /// returns.
    pub fn rv_ratio(&self, m: usize, anchor: usize, window: usize) -> Result<f64> {
        if window < 2 {
            return Err(Error::Contract(format!("window {window} must be >= 2")));
        }
        if anchor + window >= self.dates.len() {
            return Err(Error::Range(format!(
                "anchor {anchor} + window {window} exceeds panel length {}",
                self.dates.len()
            )));
        }
        let mut returns = Vec::with_capacity(window);
        for d in anchor + 1..=anchor + window {
            let prev = self.close_at(d - 1, m).ok_or_else(|| {
                Error::Data(format!(
                    "missing close for {} on {}",
                    self.tickers[m],
                    self.dates[d - 1]
                ))
            })?;
            let next = self.close_at(d, m).ok_or_else(|| {
                Error::Data(format!(
                    "missing close for {} on {}",
                    self.tickers[m], self.dates[d]
                ))
            })?;
            returns.push(next / prev - 1.0);
        }
        let cumulative = returns.iter().fold(1.0, |acc, r| acc * (1.0 + r)) - 1.0;
        let mean = returns.iter().sum::<f64>() / window as f64;
        let var =
            returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (window as f64 - 1.0);
        let sd = var.sqrt();
        let ratio = cumulative / sd;
        if sd == 0.0 || !ratio.is_finite() {
            return Err(Error::DegenerateVolatility {
                ticker: self.tickers[m].clone(),
                anchor,
            });
        }
        Ok(ratio)
    }

    /// True when ticker `m` has features at `anchor` and closes on every day
    /// of `[anchor, anchor+window]`.
    fn window_complete(&self, m: usize, anchor: usize, window: usize) -> bool {
        if self.features_at(anchor, m).is_none() {
            return false;
        }
        (anchor..=anchor + window).all(|d| self.close_at(d, m).is_some())
    }

    /// Anchor days every `window + 1` trading days from `start`, while the
    /// forward window stays inside the panel.
    pub fn auto_anchors(&self, start: usize, window: usize) -> Vec<usize> {
        let mut anchors = Vec::new();
        let mut t = start;
        while t + window < self.dates.len() {
            anchors.push(t);
            t += window + 1;
        }
        anchors
    }

    /// Tail/head labeling over the given anchors.
    ///
    /// Per anchor: rank stocks with complete windows by rv ratio descending,
    /// label the top `floor(pct * M_t / 100)` as 1 and the bottom as 0
    /// (`M_t` = stocks with complete data at the anchor), discard the middle
    /// and any zero-volatility stocks. Boundary ties break by ticker order.
    pub fn build_labeled_dataset(
        &self,
        pct: f64,
        window: usize,
        anchors: &[usize],
    ) -> Result<LabeledDataset> {
        if !(pct > 0.0 && pct <= 50.0) {
            return Err(Error::Contract(format!(
                "labeling percent {pct} outside (0, 50]"
            )));
        }
        for pair in anchors.windows(2) {
            if pair[1] <= pair[0] || pair[1] - pair[0] < window + 1 {
                return Err(Error::Overlap(format!(
                    "anchors {} and {} closer than {} days",
                    pair[0],
                    pair[1],
                    window + 1
                )));
            }
        }
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut provenance = Vec::new();
        for &anchor in anchors {
            if anchor + window >= self.dates.len() {
                return Err(Error::Range(format!(
                    "anchor {anchor} + window {window} exceeds panel length {}",
                    self.dates.len()
                )));
            }
            let mut valid = 0usize;
            let mut ranked: Vec<(usize, f64)> = Vec::new();
            for m in 0..self.tickers.len() {
                if !self.window_complete(m, anchor, window) {
                    continue;
                }
                valid += 1;
                match self.rv_ratio(m, anchor, window) {
                    Ok(ratio) => ranked.push((m, ratio)),
                    Err(Error::DegenerateVolatility { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            if valid == 0 {
                return Err(Error::Data(format!(
                    "anchor {anchor}: no stock has complete data for the window"
                )));
            }
            // Ratio descending, ticker ascending on ties.
            ranked.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .unwrap()
                    .then_with(|| self.tickers[a.0].cmp(&self.tickers[b.0]))
            });
            let count = ((pct * valid as f64 / 100.0).floor() as usize).min(ranked.len() / 2);
            for (rank, &(m, _)) in ranked.iter().enumerate() {
                let label = if rank < count {
                    1u8
                } else if rank >= ranked.len() - count {
                    0u8
                } else {
                    continue;
                };
                x.push(self.features_at(anchor, m).unwrap().to_vec());
                y.push(label);
                provenance.push(Provenance {
                    ticker: self.tickers[m].clone(),
                    anchor_date: self.dates[anchor],
                    window,
                });
            }
        }
        if x.is_empty() {
            return Err(Error::EmptyDataset(format!(
                "labeling with pct {pct} produced no rows over {} anchors",
                anchors.len()
            )));
        }
        Ok(LabeledDataset {
            x,
            y,
            provenance,
            pct,
        })
    }

    /// Write the panel as `date,ticker,close,<features...>` CSV.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        use std::io::Write;
        write!(out, "date,ticker,close")?;
        for name in &self.feature_names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        let n = self.feature_names.len();
        let mut line = String::new();
        for t in 0..self.dates.len() {
            for m in 0..self.tickers.len() {
                let idx = self.cell(t, m);
                if !self.present[idx] {
                    continue;
                }
                line.clear();
                write!(line, "{},{},{}", self.dates[t], self.tickers[m], self.closes[idx])
                    .unwrap();
                for j in 0..n {
                    write!(line, ",{}", self.values[idx * n + j]).unwrap();
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }
}

/// Load a panel from `date,ticker,close,<features...>` CSV.
///
/// The header's feature-column count must equal `expected_n`. Row order does
/// not affect the result: dates and tickers are canonically sorted.
pub fn load_panel<P: AsRef<Path>>(path: P, expected_n: usize) -> Result<FeaturePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path.as_ref())?;
    let header = reader.headers()?.clone();
    let fixed = ["date", "ticker", "close"];
    for (i, want) in fixed.iter().enumerate() {
        match header.get(i) {
            Some(got) if got == *want => {}
            got => {
                return Err(Error::Schema(format!(
                    "column {} must be '{}', found '{}'",
                    i + 1,
                    want,
                    got.unwrap_or("<none>")
                )))
            }
        }
    }
    let feature_names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
    {
        let mut seen = std::collections::HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature column '{name}'")));
            }
        }
    }
    if feature_names.len() != expected_n {
        return Err(Error::Schema(format!(
            "expected {expected_n} feature columns, found {}",
            feature_names.len()
        )));
    }
    let n = feature_names.len();

    struct Row {
        close: f64,
        features: Vec<f64>,
    }
    let mut rows: HashMap<(NaiveDate, String), Row> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let date_str = record.get(0).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d")
            .map_err(|_| Error::Data(format!("invalid date '{date_str}' (want YYYY-MM-DD)")))?;
        let ticker = record
            .get(1)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Data(format!("missing ticker on {date}")))?
            .to_string();
        if record.len() != n + 3 {
            if record.len() < n + 3 {
                let missing = header.get(record.len()).unwrap_or("<past header>");
                return Err(Error::Schema(format!(
                    "row ({date}, {ticker}): missing value for column '{missing}'"
                )));
            }
            return Err(Error::Schema(format!(
                "row ({date}, {ticker}): {} extra value(s) beyond column '{}'",
                record.len() - (n + 3),
                header.get(n + 2).unwrap(),
            )));
        }
        let close: f64 = record
            .get(2)
            .unwrap()
            .parse()
            .map_err(|_| Error::Data(format!("unparsable close for ({date}, {ticker})")))?;
        if !(close.is_finite() && close > 0.0) {
            return Err(Error::Data(format!(
                "non-positive or non-finite close {close} for ({date}, {ticker})"
            )));
        }
        let mut features = Vec::with_capacity(n);
        for j in 0..n {
            let raw = record.get(3 + j).unwrap();
            let v: f64 = raw.parse().map_err(|_| {
                Error::Data(format!(
                    "unparsable value '{raw}' in column '{}' for ({date}, {ticker})",
                    feature_names[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite value in column '{}' for ({date}, {ticker})",
                    feature_names[j]
                )));
            }
            features.push(v);
        }
        if rows
            .insert((date, ticker.clone()), Row { close, features })
            .is_some()
        {
            return Err(Error::Data(format!("duplicate row for ({date}, {ticker})")));
        }
    }

    let mut dates: Vec<NaiveDate> = rows.keys().map(|(d, _)| *d).collect();
    dates.sort_unstable();
    dates.dedup();
    let mut tickers: Vec<String> = rows.keys().map(|(_, s)| s.clone()).collect();
    tickers.sort_unstable();
    tickers.dedup();

    let date_idx: HashMap<NaiveDate, usize> = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let ticker_idx: HashMap<&str, usize> =
        tickers.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let (t_len, m_len) = (dates.len(), tickers.len());
    let mut present = vec![false; t_len * m_len];
    let mut closes = vec![f64::NAN; t_len * m_len];
    let mut values = vec![f64::NAN; t_len * m_len * n];
    for ((date, ticker), row) in rows {
        let idx = date_idx[&date] * m_len + ticker_idx[ticker.as_str()];
        present[idx] = true;
        closes[idx] = row.close;
        values[idx * n..(idx + 1) * n].copy_from_slice(&row.features);
    }
    Ok(FeaturePanel {
        dates,
        tickers,
        feature_names,
        present,
        closes,
        values,
    })
}

/// Origin of one labeled row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Provenance {
    pub ticker: String,
    pub anchor_date: NaiveDate,
    /// Forward window length the label was computed over.
    pub window: usize,
}

/// Feature matrix with binary tail/head labels and row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u8>,
    pub provenance: Vec<Provenance>,
    /// Percent used for labeling.
    pub pct: f64,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// (negatives, positives) counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.y.iter().filter(|&&l| l == 1).count();
        (self.y.len() - pos, pos)
    }

    pub fn has_both_classes(&self) -> bool {
        let (neg, pos) = self.class_counts();
        neg > 0 && pos > 0
    }

    /// Rows sorted by anchor date, partitioned contiguously at
    /// `floor(cumulative_fraction * N)` boundaries.
    pub fn chronological_split(&self, spec: &SplitSpec) -> Result<Vec<LabeledDataset>> {
        if self.is_empty() {
            return Err(Error::Split("cannot split an empty dataset".into()));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&i| (self.provenance[i].anchor_date, i));
        let n = self.len();
        let mut parts = Vec::with_capacity(spec.fractions.len());
        let mut cumulative = 0.0;
        let mut start = 0usize;
        for (k, fraction) in spec.fractions.iter().enumerate() {
            cumulative += fraction;
            let end = if k + 1 == spec.fractions.len() {
                n
            } else {
                ((cumulative * n as f64).floor() as usize).min(n)
            };
            if end <= start {
                return Err(Error::Split(format!(
                    "part {} of {} is empty (fractions {:?} over {} rows)",
                    k + 1,
                    spec.fractions.len(),
                    spec.fractions,
                    n
                )));
            }
            let idx = &order[start..end];
            parts.push(LabeledDataset {
                x: idx.iter().map(|&i| self.x[i].clone()).collect(),
                y: idx.iter().map(|&i| self.y[i]).collect(),
                provenance: idx.iter().map(|&i| self.provenance[i].clone()).collect(),
                pct: self.pct,
            });
            start = end;
        }
        Ok(parts)
    }

    /// Concatenate two datasets (used to pool split parts back together).
    pub fn concat(&self, other: &LabeledDataset) -> LabeledDataset {
        let mut out = self.clone();
        out.x.extend(other.x.iter().cloned());
        out.y.extend(other.y.iter().copied());
        out.provenance.extend(other.provenance.iter().cloned());
        out
    }

    /// Export as `ticker,anchor_date,f,label,<features...>` CSV.
    pub fn export_csv<P: AsRef<Path>>(&self, path: P, feature_names: &[String]) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        use std::io::Write;
        write!(out, "ticker,anchor_date,f,label")?;
        for name in feature_names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        let mut line = String::new();
        for i in 0..self.len() {
            let p = &self.provenance[i];
            line.clear();
            write!(line, "{},{},{},{}", p.ticker, p.anchor_date, p.window, self.y[i]).unwrap();
            for v in &self.x[i] {
                write!(line, ",{v}").unwrap();
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Chronological split fractions; must be positive and sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    fractions: Vec<f64>,
}

impl SplitSpec {
    pub fn new(fractions: Vec<f64>) -> Result<Self> {
        if fractions.is_empty() || fractions.iter().any(|&f| f <= 0.0) {
            return Err(Error::Contract(format!(
                "split fractions must all be positive, got {fractions:?}"
            )));
        }
        let total: f64 = fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!(
                "split fractions must sum to 1, got {total}"
            )));
        }
        Ok(SplitSpec { fractions })
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }
}
