//! Annotation cost: human-only versus model-assisted.
//!
//! A human-only item needs `golds_per_item_human` paid captions. An assisted
//! item needs `golds_per_item_assisted` paid captions plus the model tokens
//! spent turning them into silver annotations. All amounts are exact
//! [`Money`].

mod money;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use money::{group_thousands, Money};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("invalid amount {0:?}")]
    InvalidAmount(String),
    #[error("invalid cost model: {0}")]
    InvalidModel(String),
    #[error("per-item cost is zero, so coverage is unbounded")]
    FreeAnnotationUndefined,
    #[error("budget must not be negative")]
    NegativeBudget,
}

/// Price of model tokens, per 1,000 tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TokenPricing {
    /// One price for prompt and completion tokens alike.
    Blended { per_1k: Money },
    Split { prompt_per_1k: Money, completion_per_1k: Money },
}

impl Default for TokenPricing {
    fn default() -> Self {
        TokenPricing::Blended {
            per_1k: Money::from_micros(2_000),
        }
    }
}

impl TokenPricing {
    /// Exact cost of the given token counts, rounded half-up to a micro-unit.
    pub fn cost(&self, prompt_tokens: u64, completion_tokens: u64) -> Money {
        match *self {
            TokenPricing::Blended { per_1k } => per_1k.scale_round(prompt_tokens + completion_tokens, 1000),
            TokenPricing::Split {
                prompt_per_1k,
                completion_per_1k,
            } => {
                // sum before rounding so the split costs no more than one rounding
                let micros = prompt_per_1k.micros() * i128::from(prompt_tokens)
                    + completion_per_1k.micros() * i128::from(completion_tokens);
                Money::from_micros(micros).scale_round(1, 1000)
            }
        }
    }

    fn is_negative(&self) -> bool {
        match *self {
            TokenPricing::Blended { per_1k } => per_1k.is_negative(),
            TokenPricing::Split {
                prompt_per_1k,
                completion_per_1k,
            } => prompt_per_1k.is_negative() || completion_per_1k.is_negative(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    HumanOnly,
    Assisted,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::HumanOnly, Mode::Assisted];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::HumanOnly => "human-only",
            Mode::Assisted => "assisted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub human_cost_per_gold: Money,
    pub golds_per_item_human: u32,
    pub pricing: TokenPricing,
    /// Total billable tokens per assisted item.
    pub tokens_per_item: u64,
    /// How many of `tokens_per_item` are completion tokens; needed for split
    /// pricing.
    pub completion_tokens_per_item: Option<u64>,
    pub golds_per_item_assisted: u32,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            human_cost_per_gold: Money::from_micros(10_000),
            golds_per_item_human: 5,
            pricing: TokenPricing::default(),
            tokens_per_item: 1000,
            completion_tokens_per_item: None,
            golds_per_item_assisted: 1,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), CostError> {
        let bad = |m: &str| Err(CostError::InvalidModel(m.into()));
        if self.human_cost_per_gold.is_negative() || self.pricing.is_negative() {
            return bad("prices must not be negative");
        }
        if self.golds_per_item_human == 0 || self.golds_per_item_assisted == 0 {
            return bad("gold counts must be positive");
        }
        if self.tokens_per_item == 0 {
            return bad("tokens_per_item must be positive");
        }
        match (self.pricing, self.completion_tokens_per_item) {
            (TokenPricing::Split { .. }, None) => bad("split pricing needs completion_tokens_per_item"),
            (_, Some(c)) if c > self.tokens_per_item => bad("completion tokens exceed tokens_per_item"),
            _ => Ok(()),
        }
    }

    fn token_cost(&self) -> Money {
        let completion = self.completion_tokens_per_item.unwrap_or(0);
        self.pricing.cost(self.tokens_per_item - completion, completion)
    }

    pub fn per_item_cost(&self, mode: Mode) -> Money {
        match mode {
            Mode::HumanOnly => self.human_cost_per_gold.times(self.golds_per_item_human.into()),
            Mode::Assisted => self.human_cost_per_gold.times(self.golds_per_item_assisted.into()) + self.token_cost(),
        }
    }

    pub fn budget_for_items(&self, n_items: u64, mode: Mode) -> Money {
        self.per_item_cost(mode).times(n_items)
    }

    /// Items fully paid for by `budget`.
    pub fn coverage_under_budget(&self, budget: Money, mode: Mode) -> Result<u64, CostError> {
        if budget.is_negative() {
            return Err(CostError::NegativeBudget);
        }
        let unit = self.per_item_cost(mode);
        if unit.is_zero() {
            return Err(CostError::FreeAnnotationUndefined);
        }
        Ok(budget.whole_multiples_of(unit).unwrap_or(u64::MAX))
    }
}

pub fn per_item_cost(m: &CostModel, mode: Mode) -> Money {
    m.per_item_cost(mode)
}

pub fn budget_for_items(m: &CostModel, n_items: u64, mode: Mode) -> Money {
    m.budget_for_items(n_items, mode)
}

pub fn coverage_under_budget(m: &CostModel, budget: Money, mode: Mode) -> Result<u64, CostError> {
    m.coverage_under_budget(budget, mode)
}

/// `n` rounded to two significant figures, the precision rough prose
/// estimates tend to use.
pub fn round_two_significant(n: u64) -> u64 {
    if n < 100 {
        return n;
    }
    let mut scale = 1u64;
    while n / scale >= 100 {
        scale *= 10;
    }
    (n + scale / 2) / scale * scale
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeRow {
    pub mode: Mode,
    pub per_item: Money,
    pub total: Money,
    /// Items this mode covers with the assisted pipeline's total budget.
    pub coverage_at_equal_budget: Option<u64>,
    /// `coverage_at_equal_budget` at two significant figures, present when it
    /// differs from the exact figure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage_rounded: Option<u64>,
}

/// Side-by-side human-only and assisted cost for `items` items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub items: u64,
    pub model: CostModel,
    pub equal_budget: Money,
    pub rows: Vec<ModeRow>,
    pub notes: Vec<String>,
}

impl CostReport {
    pub fn row(&self, mode: Mode) -> &ModeRow {
        self.rows.iter().find(|r| r.mode == mode).expect("both modes present")
    }

    /// Plain-text table with thousands separators.
    pub fn to_table(&self) -> String {
        let headers = ["mode", "per item", "total", "coverage at equal budget"];
        let mut rows: Vec<[String; 4]> = vec![headers.map(String::from)];
        for r in &self.rows {
            let coverage = match (r.coverage_at_equal_budget, r.coverage_rounded) {
                (None, _) => "unbounded".to_string(),
                (Some(c), Some(approx)) => format!("{} (~{})", group_thousands(c), group_thousands(approx)),
                (Some(c), None) => group_thousands(c),
            };
            rows.push([r.mode.to_string(), r.per_item.grouped(), r.total.grouped(), coverage]);
        }
        let widths: Vec<usize> = (0..4)
            .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = format!(
            "items: {}    equal budget: {}\n",
            group_thousands(self.items),
            self.equal_budget.grouped()
        );
        for (k, r) in rows.iter().enumerate() {
            let cells: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
            if k == 0 {
                out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
                out.push('\n');
            }
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

pub fn compare_report(m: &CostModel, n_items: u64) -> Result<CostReport, CostError> {
    m.validate()?;
    let equal_budget = m.budget_for_items(n_items, Mode::Assisted);
    let mut notes = Vec::new();
    let rows = Mode::ALL
        .iter()
        .map(|&mode| {
            let coverage = match m.coverage_under_budget(equal_budget, mode) {
                Ok(c) => Some(c),
                Err(CostError::FreeAnnotationUndefined) => None,
                Err(e) => return Err(e),
            };
            let rounded = coverage.map(round_two_significant).filter(|r| Some(*r) != coverage);
            if let (Some(c), Some(r)) = (coverage, rounded) {
                notes.push(format!(
                    "{mode} coverage is exactly {}; rounded to two significant figures it reads {}",
                    group_thousands(c),
                    group_thousands(r)
                ));
            }
            Ok(ModeRow {
                mode,
                per_item: m.per_item_cost(mode),
                total: m.budget_for_items(n_items, mode),
                coverage_at_equal_budget: coverage,
                coverage_rounded: rounded,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CostReport {
        items: n_items,
        model: m.clone(),
        equal_budget,
        rows,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(s: &str) -> Money {
        s.parse().unwrap()
    }

    #[test]
    fn per_item_defaults() {
        let d = CostModel::default();
        d.validate().unwrap();
        assert_eq!(d.per_item_cost(Mode::HumanOnly), m("0.05"));
        assert_eq!(d.per_item_cost(Mode::Assisted), m("0.012"));
    }

    #[test]
    fn zero_price_and_zero_tokens() {
        let free_tokens = CostModel {
            pricing: TokenPricing::Blended { per_1k: Money::ZERO },
            ..CostModel::default()
        };
        assert_eq!(free_tokens.per_item_cost(Mode::Assisted), m("0.01"));
        let no_tokens = CostModel {
            tokens_per_item: 0,
            ..CostModel::default()
        };
        assert!(matches!(no_tokens.validate(), Err(CostError::InvalidModel(_))));
        let free = CostModel {
            human_cost_per_gold: Money::ZERO,
            pricing: TokenPricing::Blended { per_1k: Money::ZERO },
            ..CostModel::default()
        };
        assert_eq!(
            free.coverage_under_budget(m("10"), Mode::HumanOnly),
            Err(CostError::FreeAnnotationUndefined)
        );
        assert!(compare_report(&free, 10).unwrap().row(Mode::Assisted).coverage_at_equal_budget.is_none());
    }

    #[test]
    fn budgets_and_coverage() {
        let d = CostModel::default();
        assert_eq!(d.budget_for_items(6_400, Mode::Assisted).to_string(), "76.80");
        assert_eq!(d.budget_for_items(24_000, Mode::Assisted).to_string(), "288.00");
        assert_eq!(d.budget_for_items(0, Mode::Assisted), Money::ZERO);
        assert_eq!(d.coverage_under_budget(m("984.00"), Mode::HumanOnly), Ok(19_680));
        assert_eq!(d.coverage_under_budget(m("76.80"), Mode::HumanOnly), Ok(1_536));
        assert_eq!(d.coverage_under_budget(m("288.00"), Mode::HumanOnly), Ok(5_760));
        assert_eq!(d.coverage_under_budget(m("-1"), Mode::HumanOnly), Err(CostError::NegativeBudget));
    }

    #[test]
    fn split_pricing() {
        let s = CostModel {
            pricing: TokenPricing::Split {
                prompt_per_1k: m("0.001"),
                completion_per_1k: m("0.002"),
            },
            ..CostModel::default()
        };
        assert!(matches!(s.validate(), Err(CostError::InvalidModel(_))));
        let s = CostModel {
            completion_tokens_per_item: Some(200),
            ..s
        };
        s.validate().unwrap();
        // 800 prompt tokens at 0.001 + 200 completion at 0.002 = 0.0012
        assert_eq!(s.per_item_cost(Mode::Assisted), m("0.0112"));
    }

    #[test]
    fn doubled_token_price() {
        let d = CostModel {
            pricing: TokenPricing::Blended { per_1k: m("0.004") },
            ..CostModel::default()
        };
        assert_eq!(d.per_item_cost(Mode::Assisted), m("0.014"));
    }

    #[test]
    fn report_flags_rounded_figures() {
        let d = CostModel::default();
        let r = compare_report(&d, 82_000).unwrap();
        assert_eq!(r.equal_budget, m("984"));
        assert_eq!(r.row(Mode::HumanOnly).coverage_at_equal_budget, Some(19_680));
        assert_eq!(r.row(Mode::Assisted).coverage_at_equal_budget, Some(82_000));
        assert!(r.to_table().contains("19,680"));

        let r = compare_report(&d, 6_400).unwrap();
        assert_eq!(r.row(Mode::HumanOnly).coverage_at_equal_budget, Some(1_536));
        assert_eq!(r.row(Mode::HumanOnly).coverage_rounded, Some(1_500));
        assert!(r.notes.iter().any(|n| n.contains("1,536") && n.contains("1,500")));

        let r = compare_report(&d, 24_000).unwrap();
        assert_eq!(r.row(Mode::HumanOnly).coverage_at_equal_budget, Some(5_760));
        assert_eq!(r.row(Mode::HumanOnly).coverage_rounded, Some(5_800));

        let r = compare_report(&d, 1).unwrap();
        for row in &r.rows {
            assert_eq!(row.total, row.per_item);
        }
        let json = serde_json::to_value(compare_report(&d, 6_400).unwrap()).unwrap();
        assert_eq!(json["equal_budget"], "76.80");
        assert_eq!(json["rows"][1]["per_item"], "0.012");
    }

    #[test]
    fn two_significant_figures() {
        assert_eq!(round_two_significant(1_536), 1_500);
        assert_eq!(round_two_significant(5_760), 5_800);
        assert_eq!(round_two_significant(19_680), 20_000);
        assert_eq!(round_two_significant(82_000), 82_000);
        assert_eq!(round_two_significant(95), 95);
        assert_eq!(round_two_significant(995), 1_000);
    }

    fn model() -> impl Strategy<Value = CostModel> {
        (0i128..100_000, 1u32..10, 0i128..10_000, 1u64..5_000, 1u32..4).prop_map(|(h, gh, p, t, ga)| CostModel {
            human_cost_per_gold: Money::from_micros(h),
            golds_per_item_human: gh,
            pricing: TokenPricing::Blended {
                per_1k: Money::from_micros(p),
            },
            tokens_per_item: t,
            completion_tokens_per_item: None,
            golds_per_item_assisted: ga,
        })
    }

    proptest! {
        #[test]
        fn linear_in_items(m in model(), a in 0u64..1_000_000, b in 0u64..1_000_000) {
            for mode in Mode::ALL {
                prop_assert_eq!(m.budget_for_items(a + b, mode), m.budget_for_items(a, mode) + m.budget_for_items(b, mode));
            }
        }

        #[test]
        fn coverage_monotone_and_consistent(m in model(), n in 0u64..1_000_000, extra in 0i128..1_000_000) {
            for mode in Mode::ALL {
                if m.per_item_cost(mode).is_zero() {
                    continue;
                }
                let budget = m.budget_for_items(n, mode);
                prop_assert_eq!(m.coverage_under_budget(budget, mode).unwrap(), n);
                let more = budget + Money::from_micros(extra);
                prop_assert!(m.coverage_under_budget(more, mode).unwrap() >= n);
            }
            let pricier = CostModel { human_cost_per_gold: m.human_cost_per_gold + Money::from_micros(1), ..m.clone() };
            let budget = Money::from_micros(123_456_789);
            for mode in Mode::ALL {
                if m.per_item_cost(mode).is_zero() {
                    continue;
                }
                prop_assert!(pricier.coverage_under_budget(budget, mode).unwrap() <= m.coverage_under_budget(budget, mode).unwrap());
            }
        }
    }
}
