use std::collections::BTreeMap;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenUsage {
    pub const fn new(prompt_tokens: u64, completion_tokens: u64) -> Self {
        TokenUsage {
            prompt_tokens,
            completion_tokens,
        }
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    pub fn is_zero(&self) -> bool {
        self.total() == 0
    }
}

impl Add for TokenUsage {
    type Output = TokenUsage;
    fn add(self, rhs: Self) -> Self {
        TokenUsage {
            prompt_tokens: self.prompt_tokens + rhs.prompt_tokens,
            completion_tokens: self.completion_tokens + rhs.completion_tokens,
        }
    }
}

impl AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sum for TokenUsage {
    fn sum<I: Iterator<Item = TokenUsage>>(iter: I) -> Self {
        iter.fold(TokenUsage::default(), Add::add)
    }
}

/// Who a completion call is billed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    WeakExplore,
    StrongExplore,
    StrongExploit,
    Extraction,
}

impl Role {
    pub const ALL: [Role; 4] = [
        Role::WeakExplore,
        Role::StrongExplore,
        Role::StrongExploit,
        Role::Extraction,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::WeakExplore => "weak-explore",
            Role::StrongExplore => "strong-explore",
            Role::StrongExploit => "strong-exploit",
            Role::Extraction => "extraction",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A dollar amount held in whole cents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cents(pub i64);

impl Cents {
    /// Rounds a dollar amount to cents, half away from zero.
    pub fn from_dollars(dollars: f64) -> Self {
        let scaled = dollars * 100.0;
        // Absorb representation error so that x.5 cents never rounds down.
        let rounded = (scaled.abs() + 0.5 + 1e-7).floor();
        Cents(if scaled < 0.0 { -(rounded as i64) } else { rounded as i64 })
    }

    pub fn dollars(&self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl Add for Cents {
    type Output = Cents;
    fn add(self, rhs: Self) -> Self {
        Cents(self.0 + rhs.0)
    }
}

impl Sum for Cents {
    fn sum<I: Iterator<Item = Cents>>(iter: I) -> Self {
        iter.fold(Cents::default(), Add::add)
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

/// Exact (unrounded) dollars for `tokens` at `price_per_1k`.
pub fn raw_expense(usage: TokenUsage, price_per_1k: f64) -> f64 {
    usage.total() as f64 / 1000.0 * price_per_1k
}

/// Dollars per 1000 tokens (prompt and completion billed alike) per role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    pub per_1k: BTreeMap<Role, f64>,
}

/// Rate that reproduces the published strong-model expenses.
pub const DEFAULT_STRONG_PRICE_PER_1K: f64 = 0.02;

impl Default for PriceTable {
    fn default() -> Self {
        PriceTable::new(0.0, DEFAULT_STRONG_PRICE_PER_1K)
    }
}

impl PriceTable {
    /// Weak exploration and extraction at `weak`, strong roles at `strong`.
    pub fn new(weak: f64, strong: f64) -> Self {
        let mut per_1k = BTreeMap::new();
        per_1k.insert(Role::WeakExplore, weak);
        per_1k.insert(Role::Extraction, weak);
        per_1k.insert(Role::StrongExplore, strong);
        per_1k.insert(Role::StrongExploit, strong);
        PriceTable { per_1k }
    }

    pub fn with(mut self, role: Role, price: f64) -> Self {
        self.per_1k.insert(role, price);
        self
    }

    pub fn price(&self, role: Role) -> f64 {
        self.per_1k.get(&role).copied().unwrap_or(0.0)
    }
}

/// One recorded completion call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub seq: u64,
    pub role: Role,
    pub usage: TokenUsage,
}

/// Per-role dollar totals derived from a ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expense {
    pub per_role: BTreeMap<Role, Cents>,
    pub total: Cents,
}

/// Frozen view of a ledger, embedded in episode results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub usage: BTreeMap<Role, TokenUsage>,
    pub prices: PriceTable,
    pub expense: Expense,
    pub events: Vec<LedgerEvent>,
}

impl LedgerSnapshot {
    pub fn total_usage(&self) -> TokenUsage {
        self.usage.values().copied().sum()
    }

    pub fn usage_for(&self, role: Role) -> TokenUsage {
        self.usage.get(&role).copied().unwrap_or_default()
    }
}

#[derive(Debug, Default)]
struct LedgerInner {
    usage: BTreeMap<Role, TokenUsage>,
    events: Vec<LedgerEvent>,
}

/// Thread-safe accumulator of token usage per role.
#[derive(Debug, Default)]
pub struct CostLedger {
    prices: PriceTable,
    inner: Mutex<LedgerInner>,
}

impl CostLedger {
    pub fn new(prices: PriceTable) -> Self {
        CostLedger {
            prices,
            inner: Mutex::default(),
        }
    }

    pub fn prices(&self) -> &PriceTable {
        &self.prices
    }

    /// Records one call and returns its sequence number.
    pub fn record(&self, role: Role, usage: TokenUsage) -> u64 {
        let mut inner = self.inner.lock().expect("ledger lock poisoned");
        let seq = inner.events.len() as u64;
        *inner.usage.entry(role).or_default() += usage;
        inner.events.push(LedgerEvent { seq, role, usage });
        seq
    }

    pub fn usage(&self, role: Role) -> TokenUsage {
        let inner = self.inner.lock().expect("ledger lock poisoned");
        inner.usage.get(&role).copied().unwrap_or_default()
    }

    pub fn call_count(&self) -> usize {
        self.inner.lock().expect("ledger lock poisoned").events.len()
    }

    pub fn expense(&self) -> Expense {
        let inner = self.inner.lock().expect("ledger lock poisoned");
        ledger_expense(&inner.usage, &self.prices)
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let inner = self.inner.lock().expect("ledger lock poisoned");
        LedgerSnapshot {
            usage: inner.usage.clone(),
            prices: self.prices.clone(),
            expense: ledger_expense(&inner.usage, &self.prices),
            events: inner.events.clone(),
        }
    }
}

/// Per-role expense rounded to cents half-up, and their sum.
pub fn ledger_expense(usage: &BTreeMap<Role, TokenUsage>, prices: &PriceTable) -> Expense {
    let per_role: BTreeMap<Role, Cents> = usage
        .iter()
        .map(|(role, u)| (*role, Cents::from_dollars(raw_expense(*u, prices.price(*role)))))
        .collect();
    let total = per_role.values().copied().sum();
    Expense { per_role, total }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_role(role: Role, usage: TokenUsage) -> Expense {
        let mut m = BTreeMap::new();
        m.insert(role, usage);
        ledger_expense(&m, &PriceTable::default())
    }

    #[test]
    fn reproduces_published_act_expense() {
        let e = one_role(Role::StrongExploit, TokenUsage::new(4_908_548, 21_243));
        assert_eq!(e.total, Cents(9860));
        assert_eq!(e.total.to_string(), "98.60");
    }

    #[test]
    fn reproduces_published_react_expense() {
        let e = one_role(Role::StrongExploit, TokenUsage::new(7_565_676, 43_250));
        assert_eq!(e.total, Cents(15218));
    }

    #[test]
    fn zero_usage_costs_nothing() {
        let ledger = CostLedger::new(PriceTable::default());
        assert_eq!(ledger.expense().total, Cents(0));
        ledger.record(Role::StrongExploit, TokenUsage::default());
        assert_eq!(ledger.expense().total.to_string(), "0.00");
    }

    #[test]
    fn weak_roles_are_free_by_default() {
        let ledger = CostLedger::new(PriceTable::default());
        ledger.record(Role::WeakExplore, TokenUsage::new(1_000_000, 10));
        ledger.record(Role::Extraction, TokenUsage::new(500_000, 10));
        ledger.record(Role::StrongExploit, TokenUsage::new(1000, 0));
        let e = ledger.expense();
        assert_eq!(e.per_role[&Role::WeakExplore], Cents(0));
        assert_eq!(e.total, Cents(2));
    }

    #[test]
    fn half_cent_rounds_up() {
        assert_eq!(Cents::from_dollars(0.125), Cents(13));
        assert_eq!(Cents::from_dollars(0.124), Cents(12));
        assert_eq!(Cents::from_dollars(-0.125), Cents(-13));
        assert_eq!(Cents(-5).to_string(), "-0.05");
    }

    #[test]
    fn events_are_sequenced() {
        let ledger = CostLedger::new(PriceTable::default());
        assert_eq!(ledger.record(Role::WeakExplore, TokenUsage::new(1, 1)), 0);
        assert_eq!(ledger.record(Role::StrongExploit, TokenUsage::new(2, 2)), 1);
        let snap = ledger.snapshot();
        assert_eq!(snap.events.len(), 2);
        assert_eq!(snap.total_usage(), TokenUsage::new(3, 3));
    }
}
