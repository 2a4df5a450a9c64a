//! Non-parametric treatment ranking: median/IQR summaries, the Friedman
//! test, and Nemenyi critical-distance grouping rendered as darkness tiers
//! (tier 0 = best group).

use crate::error::StatsError;

/// Interpolated percentile (linear between closest ranks), `p` in [0, 100].
pub fn percentile(values: &[f64], p: f64) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (h - lo as f64))
}

/// 50th percentile and (75-25)th percentile spread.
pub fn median_iqr(values: &[f64]) -> Result<(f64, f64), StatsError> {
    let med = percentile(values, 50.0)?;
    let iqr = percentile(values, 75.0)? - percentile(values, 25.0)?;
    Ok((med, iqr))
}

/// Metric values for `treatments x blocks`; `values[t][b]` is treatment `t`
/// on block `b` (a dataset/repeat combination).
#[derive(Debug, Clone)]
pub struct TreatmentTable {
    pub treatments: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl TreatmentTable {
    pub fn new(treatments: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self, StatsError> {
        let k = treatments.len();
        if k < 2 || values.len() != k {
            return Err(StatsError::Degenerate {
                treatments: k,
                blocks: values.first().map_or(0, |v| v.len()),
            });
        }
        let n = values[0].len();
        if n < 2 {
            return Err(StatsError::Degenerate {
                treatments: k,
                blocks: n,
            });
        }
        for (t, row) in values.iter().enumerate() {
            if row.len() != n {
                return Err(StatsError::Ragged {
                    treatment: t,
                    got: row.len(),
                    expected: n,
                });
            }
        }
        Ok(Self { treatments, values })
    }

    pub fn k(&self) -> usize {
        self.treatments.len()
    }

    pub fn blocks(&self) -> usize {
        self.values[0].len()
    }
}

/// Within-block ranks (1 = smallest value), average ranks on ties.
fn block_ranks(column: &[f64]) -> Vec<f64> {
    let k = column.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut ranks = vec![0.0; k];
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && column[order[j + 1]] == column[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Mean within-block rank per treatment, ranking so that rank 1 is best
/// under the given direction.
pub fn mean_ranks(table: &TreatmentTable, higher_is_better: bool) -> Vec<f64> {
    let (k, n) = (table.k(), table.blocks());
    let mut sums = vec![0.0; k];
    for b in 0..n {
        let column: Vec<f64> = (0..k)
            .map(|t| {
                let v = table.values[t][b];
                if higher_is_better {
                    -v
                } else {
                    v
                }
            })
            .collect();
        for (t, r) in block_ranks(&column).into_iter().enumerate() {
            sums[t] += r;
        }
    }
    sums.iter().map(|s| s / n as f64).collect()
}

/// Friedman chi-square statistic and p-value for "all treatments rank the
/// same across blocks". Direction-free: ranks enter only through squares.
pub fn friedman(table: &TreatmentTable) -> Result<(f64, f64), StatsError> {
    let (k, n) = (table.k(), table.blocks());
    let mean = mean_ranks(table, false);
    let kf = k as f64;
    let nf = n as f64;
    let sum_sq: f64 = mean.iter().map(|r| r * r).sum();
    let stat = 12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0) * (kf + 1.0) / 4.0);
    let stat = stat.max(0.0); // guard tiny negative round-off on all-tied tables
    let p = chi2_sf(stat, (k - 1) as f64);
    Ok((stat, p))
}

/// Nemenyi critical distance at alpha = 0.05 for `k` treatments over `n`
/// blocks: `q_k * sqrt(k (k+1) / (6 n))`.
pub fn critical_distance(k: usize, n: usize) -> Result<f64, StatsError> {
    let q = q_alpha_05(k)?;
    let kf = k as f64;
    Ok(q * (kf * (kf + 1.0) / (6.0 * n as f64)).sqrt())
}

/// Per-treatment summary with its darkness tier (0 = best group).
#[derive(Debug, Clone)]
pub struct RankReport {
    pub treatment: String,
    pub median: f64,
    pub iqr: f64,
    pub mean_rank: f64,
    pub tier: usize,
}

/// Group treatments whose mean ranks sit within one critical distance of the
/// group's best, walking best-to-worst so tiers stay contiguous. Callers
/// gate this on a significant Friedman p-value.
pub fn nemenyi(
    table: &TreatmentTable,
    higher_is_better: bool,
) -> Result<Vec<RankReport>, StatsError> {
    let ranks = mean_ranks(table, higher_is_better);
    let cd = critical_distance(table.k(), table.blocks())?;

    let mut order: Vec<usize> = (0..table.k()).collect();
    order.sort_by(|&a, &b| ranks[a].total_cmp(&ranks[b]));

    let mut tier_of = vec![0usize; table.k()];
    let mut tier = 0usize;
    let mut anchor = ranks[order[0]];
    for &t in &order {
        if ranks[t] - anchor >= cd {
            tier += 1;
            anchor = ranks[t];
        }
        tier_of[t] = tier;
    }

    let mut out = Vec::with_capacity(table.k());
    for (t, rank) in ranks.iter().enumerate() {
        let (median, iqr) = median_iqr(&table.values[t])?;
        out.push(RankReport {
            treatment: table.treatments[t].clone(),
            median,
            iqr,
            mean_rank: *rank,
            tier: tier_of[t],
        });
    }
    Ok(out)
}

/// When the Friedman gate does not fire, every treatment shares tier 0.
pub fn flat_report(table: &TreatmentTable, higher_is_better: bool) -> Result<Vec<RankReport>, StatsError> {
    let ranks = mean_ranks(table, higher_is_better);
    let mut out = Vec::with_capacity(table.k());
    for (t, rank) in ranks.iter().enumerate() {
        let (median, iqr) = median_iqr(&table.values[t])?;
        out.push(RankReport {
            treatment: table.treatments[t].clone(),
            median,
            iqr,
            mean_rank: *rank,
            tier: 0,
        });
    }
    Ok(out)
}

/// Studentized-range constants over sqrt(2) for alpha = 0.05 and infinite
/// degrees of freedom, k = 2..=20.
fn q_alpha_05(k: usize) -> Result<f64, StatsError> {
    const Q: [f64; 19] = [
        1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219, 3.268, 3.313,
        3.354, 3.391, 3.426, 3.458, 3.489, 3.517, 3.544,
    ];
    if (2..=20).contains(&k) {
        Ok(Q[k - 2])
    } else {
        Err(StatsError::UnsupportedK(k))
    }
}

/// Chi-square survival function `P(X > x)` with `df` degrees of freedom,
/// via the regularized incomplete gamma function.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    1.0 - reg_lower_gamma(df / 2.0, x / 2.0)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma P(a, x): series for x < a + 1,
/// continued fraction otherwise.
fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_g = ln_gamma(a);
    if x < a + 1.0 {
        // series expansion
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = a;
        for _ in 0..500 {
            n += 1.0;
            term *= x / n;
            sum += term;
            if term.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        (sum.ln() + a * x.ln() - x - ln_g).exp()
    } else {
        // Lentz continued fraction for Q(a, x)
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-15 {
                break;
            }
        }
        let q = (a * x.ln() - x - ln_g).exp() * h;
        1.0 - q
    }
}

/// Render reports as a Markdown table, one row per treatment in tier order.
pub fn render_markdown(title: &str, reports: &[RankReport]) -> String {
    let mut rows: Vec<&RankReport> = reports.iter().collect();
    rows.sort_by(|a, b| {
        a.tier
            .cmp(&b.tier)
            .then(a.mean_rank.total_cmp(&b.mean_rank))
            .then(a.treatment.cmp(&b.treatment))
    });
    let mut out = format!("## {title}\n\n");
    out.push_str("| tier | treatment | median | iqr | mean rank |\n");
    out.push_str("|---:|:---|---:|---:|---:|\n");
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {:.4} | {:.4} | {:.3} |\n",
            r.tier, r.treatment, r.median, r.iqr, r.mean_rank
        ));
    }
    out
}

/// Render reports as tab-delimited text (same ordering as the Markdown view).
pub fn render_tsv(reports: &[RankReport]) -> String {
    let mut rows: Vec<&RankReport> = reports.iter().collect();
    rows.sort_by(|a, b| {
        a.tier
            .cmp(&b.tier)
            .then(a.mean_rank.total_cmp(&b.mean_rank))
            .then(a.treatment.cmp(&b.treatment))
    });
    let mut out = String::from("tier\ttreatment\tmedian\tiqr\tmean_rank\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{:.4}\t{:.4}\t{:.3}\n",
            r.tier, r.treatment, r.median, r.iqr, r.mean_rank
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-9;

    #[test]
    fn median_iqr_examples() {
        let (m, i) = median_iqr(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((m - 3.0).abs() < EPS);
        assert!((i - 2.0).abs() < EPS);
        assert_eq!(median_iqr(&[7.0]).unwrap(), (7.0, 0.0));
        assert_eq!(median_iqr(&[4.0; 4]).unwrap(), (4.0, 0.0));
        assert!(median_iqr(&[]).is_err());
    }

    fn table(values: Vec<Vec<f64>>) -> TreatmentTable {
        let names = (0..values.len()).map(|i| format!("t{i}")).collect();
        TreatmentTable::new(names, values).unwrap()
    }

    #[test]
    fn friedman_all_tied() {
        let t = table(vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]);
        let (stat, p) = friedman(&t).unwrap();
        assert!(stat.abs() < EPS);
        assert!((p - 1.0).abs() < 1e-6);
    }

    #[test]
    fn friedman_hand_example() {
        // k=3 treatments, n=4 blocks, ranks always (1, 2, 3):
        // 12*4/(3*4) * [(1+4+9) - 3*16/4] = 4 * 2 = 8; chi2_2 tail = e^-4
        let t = table(vec![
            vec![1.0, 1.0, 1.0, 1.0],
            vec![2.0, 2.0, 2.0, 2.0],
            vec![3.0, 3.0, 3.0, 3.0],
        ]);
        let (stat, p) = friedman(&t).unwrap();
        assert!((stat - 8.0).abs() < EPS);
        assert!((p - (-4.0f64).exp()).abs() < 1e-3);
        assert!((p - 0.0183).abs() < 1e-3);
    }

    #[test]
    fn friedman_block_permutation_invariant() {
        let a = table(vec![vec![3.0, 1.0, 2.0], vec![1.0, 2.0, 9.0], vec![2.0, 0.0, 4.0]]);
        let b = table(vec![vec![2.0, 3.0, 1.0], vec![9.0, 1.0, 2.0], vec![4.0, 2.0, 0.0]]);
        assert_eq!(friedman(&a).unwrap().0, friedman(&b).unwrap().0);
    }

    #[test]
    fn friedman_scale_invariant() {
        let a = table(vec![vec![3.0, 1.0, 2.0], vec![1.0, 2.0, 9.0]]);
        let b = table(vec![vec![30.0, 10.0, 20.0], vec![10.0, 20.0, 90.0]]);
        let (sa, pa) = friedman(&a).unwrap();
        let (sb, pb) = friedman(&b).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(pa, pb);
    }

    #[test]
    fn rank_sum_conservation() {
        let t = table(vec![
            vec![3.0, 1.0, 2.0, 8.0],
            vec![1.0, 2.0, 9.0, 2.0],
            vec![2.0, 0.0, 4.0, 1.0],
        ]);
        let ranks = mean_ranks(&t, false);
        let k = 3.0;
        assert!((ranks.iter().sum::<f64>() - k * (k + 1.0) / 2.0).abs() < EPS);
    }

    #[test]
    fn critical_distance_two_treatments() {
        // q(2) = 1.960: CD = 1.960 * sqrt(2*3/(6*10)) ~ 0.62
        let cd = critical_distance(2, 10).unwrap();
        assert!((cd - 0.6198).abs() < 1e-3);
        assert!(matches!(critical_distance(21, 10), Err(StatsError::UnsupportedK(21))));
    }

    #[test]
    fn nemenyi_groups() {
        // two nearly identical treatments share a tier
        let close = table(vec![
            vec![1.0, 2.0, 3.0, 4.0, 2.0, 1.0, 3.0, 4.0, 1.0, 2.0],
            vec![1.1, 1.9, 3.1, 3.9, 2.1, 0.9, 3.1, 3.9, 1.1, 1.9],
        ]);
        let r = nemenyi(&close, false).unwrap();
        assert_eq!(r[0].tier, r[1].tier);

        // forced strict order with many blocks: singleton tiers
        let n = 200;
        let strict = table(vec![
            (0..n).map(|i| i as f64).collect(),
            (0..n).map(|i| i as f64 + 10.0).collect(),
            (0..n).map(|i| i as f64 + 20.0).collect(),
        ]);
        let r = nemenyi(&strict, false).unwrap();
        let tiers: Vec<usize> = r.iter().map(|x| x.tier).collect();
        assert_eq!(tiers, vec![0, 1, 2]);
        // direction flip reverses the tiers
        let r = nemenyi(&strict, true).unwrap();
        let tiers: Vec<usize> = r.iter().map(|x| x.tier).collect();
        assert_eq!(tiers, vec![2, 1, 0]);
    }

    #[test]
    fn chi2_spot_values() {
        // survival of chi2 with 2 df is exp(-x/2)
        for x in [0.5, 1.0, 3.0, 8.0] {
            assert!((chi2_sf(x, 2.0) - (-x / 2.0f64).exp()).abs() < 1e-9);
        }
        // chi2(1): P(X > 3.841) ~ 0.05
        assert!((chi2_sf(3.841, 1.0) - 0.05).abs() < 1e-3);
        // chi2(5): P(X > 11.07) ~ 0.05
        assert!((chi2_sf(11.07, 5.0) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn renders_are_ordered_and_stable() {
        let t = table(vec![
            vec![5.0, 6.0, 7.0, 8.0],
            vec![1.0, 2.0, 3.0, 4.0],
        ]);
        let r = nemenyi(&t, false).unwrap();
        let md = render_markdown("mre / commits", &r);
        assert!(md.contains("| 0 | t1 |"));
        let tsv = render_tsv(&r);
        assert!(tsv.starts_with("tier\t"));
        assert!(tsv.lines().count() == 3);
    }
}
