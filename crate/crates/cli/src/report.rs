//! CSV output. Every file starts with a header row; rates are in
//! bits/s/Hz, SNR in dB, times in seconds, MSE and accuracy are unitless.

use std::fmt::Write;

use ris_hybrid::dlmdc::TrainHistory;

use crate::commands::{RateTable, RuntimeRow};

/// `epoch,classifier_index,train_mse,val_mse`; per-classifier rows, then
/// rows with classifier index `mean`.
pub fn history_csv(h: &TrainHistory) -> String {
    let mut out = String::from("epoch,classifier_index,train_mse,val_mse\n");
    for (n, c) in h.classifiers.iter().enumerate() {
        for p in &c.points {
            writeln!(out, "{},{n},{},{}", p.epoch, p.train_mse, p.val_mse).unwrap();
        }
    }
    for p in h.mean() {
        writeln!(out, "{},mean,{},{}", p.epoch, p.train_mse, p.val_mse).unwrap();
    }
    out
}

/// `element_index,accuracy_fraction`, then a `mean` row.
pub fn accuracy_csv(acc: &[f64]) -> String {
    let mut out = String::from("element_index,accuracy_fraction\n");
    for (n, a) in acc.iter().enumerate() {
        writeln!(out, "{n},{a}").unwrap();
    }
    let mean = acc.iter().sum::<f64>() / acc.len().max(1) as f64;
    writeln!(out, "mean,{mean}").unwrap();
    out
}

/// `snr_db`, one mean-rate column per scheme, and the bank-to-CEO ratio.
pub fn rate_csv(t: &RateTable) -> String {
    let mut out = String::from("snr_db");
    for s in &t.schemes {
        write!(out, ",{}_rate_bits_per_s_per_hz", s.name()).unwrap();
    }
    out.push_str(",dlmdc_to_ceo_ratio\n");
    for (i, snr) in t.snr_db.iter().enumerate() {
        write!(out, "{snr}").unwrap();
        for &s in &t.schemes {
            write!(out, ",{}", t.mean(s, i)).unwrap();
        }
        let ratio = t.mean(crate::commands::Scheme::Dlmdc, i) / t.mean(crate::commands::Scheme::Ceo, i);
        writeln!(out, ",{ratio}").unwrap();
    }
    out
}

/// Empirical CDF of the per-channel rate at the first SNR of `t`:
/// `snr_db,scheme,rate_bits_per_s_per_hz,cumulative_probability`.
pub fn cdf_csv(t: &RateTable) -> String {
    let mut out = String::from("snr_db,scheme,rate_bits_per_s_per_hz,cumulative_probability\n");
    let snr = t.snr_db[0];
    for (s, scheme) in t.schemes.iter().enumerate() {
        let mut v = t.rates[s][0].clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        for (i, r) in v.iter().enumerate() {
            let p = if i + 1 == n { 1.0 } else { (i + 1) as f64 / n as f64 };
            writeln!(out, "{snr},{},{r},{p}", scheme.name()).unwrap();
        }
    }
    out
}

/// `batch_size,dlmdc_seconds,ceo_seconds,speedup,ceo_evaluations_per_channel`.
pub fn runtime_csv(rows: &[RuntimeRow]) -> String {
    let mut out = String::from("batch_size,dlmdc_seconds,ceo_seconds,speedup,ceo_evaluations_per_channel\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.batch_size,
            r.dlmdc_seconds,
            r.ceo_seconds,
            r.speedup(),
            r.ceo_evaluations_per_channel
        )
        .unwrap();
    }
    out
}

/// Drops the columns whose header names a wall-clock quantity.
pub fn without_timing(csv: &str) -> String {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let keep: Vec<bool> = header
        .split(',')
        .map(|h| !(h.ends_with("_seconds") || h == "speedup"))
        .collect();
    let select = |line: &str| {
        line.split(',').zip(&keep).filter(|(_, &k)| k).map(|(c, _)| c).collect::<Vec<_>>().join(",")
    };
    let mut out = select(header);
    out.push('\n');
    for l in lines {
        out.push_str(&select(l));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commands::Scheme;
    use ris_hybrid::dlmdc::{ClassifierHistory, HistoryPoint};

    fn table() -> RateTable {
        RateTable {
            snr_db: vec![5.0],
            schemes: vec![Scheme::Dlmdc, Scheme::Ceo],
            rates: vec![vec![vec![3.0, 1.0, 2.0]], vec![vec![4.0, 2.0, 3.0]]],
        }
    }

    #[test]
    fn cdf_is_nondecreasing_and_ends_at_one() {
        let csv = cdf_csv(&table());
        let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
        for scheme in ["dlmdc", "ceo"] {
            let ps: Vec<f64> = rows.iter().filter(|r| r[1] == scheme).map(|r| r[3].parse().unwrap()).collect();
            let rs: Vec<f64> = rows.iter().filter(|r| r[1] == scheme).map(|r| r[2].parse().unwrap()).collect();
            assert!(ps.windows(2).all(|w| w[0] <= w[1]));
            assert!(rs.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(*ps.last().unwrap(), 1.0);
        }
    }

    #[test]
    fn rate_csv_header_and_ratio() {
        let csv = rate_csv(&table());
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "snr_db,dlmdc_rate_bits_per_s_per_hz,ceo_rate_bits_per_s_per_hz,dlmdc_to_ceo_ratio"
        );
        assert_eq!(lines.next().unwrap(), "5,2,3,0.6666666666666666");
    }

    #[test]
    fn history_row_count() {
        let p = |e| HistoryPoint {
            epoch: e,
            train_mse: 0.1,
            val_mse: 0.2,
        };
        let c = ClassifierHistory {
            points: vec![p(0), p(10), p(20)],
            attempts: 1,
            batch_size: 128,
            dropout_keep: 0.9,
        };
        let h = TrainHistory {
            classifiers: vec![c.clone(), c.clone(), c],
        };
        // 3 classifiers × 3 marked epochs, plus 3 mean rows, plus the header.
        assert_eq!(history_csv(&h).lines().count(), 1 + 9 + 3);
    }

    #[test]
    fn timing_columns_are_stripped() {
        let rows = vec![RuntimeRow {
            batch_size: 100,
            dlmdc_seconds: 0.5,
            ceo_seconds: 2.0,
            ceo_evaluations_per_channel: 6000,
        }];
        assert_eq!(
            without_timing(&runtime_csv(&rows)),
            "batch_size,ceo_evaluations_per_channel\n100,6000\n"
        );
    }
}
