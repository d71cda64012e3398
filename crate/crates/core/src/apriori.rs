//! Apriori frequent itemset mining over session transactions, association
//! rules with exact integer confidence, and directed candidate links.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

use crate::preprocess::Transaction;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MiningError {
    #[error("cannot mine an empty transaction list")]
    NoTransactions,
    #[error("invalid fraction {0:?}")]
    BadFraction(String),
    #[error("invalid mining parameters: {0}")]
    BadParams(&'static str),
}

/// Exact non-negative fraction, parsed from `0.05`, `2/3` or `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(Ratio<i64>);

impl Fraction {
    pub fn new(numer: i64, denom: i64) -> Self {
        Self(Ratio::new(numer, denom))
    }

    pub fn zero() -> Self {
        Self::new(0, 1)
    }

    pub fn one() -> Self {
        Self::new(1, 1)
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn to_f64(self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// Smallest count `c` with `c / total >= self`, at least 1.
    pub fn min_count(self, total: usize) -> usize {
        let needed = (self.0 * Ratio::from_integer(total as i64)).ceil().to_integer();
        needed.max(1) as usize
    }

    fn checked_sub(self, other: Self) -> Self {
        Self(self.0 - other.0)
    }

    fn scaled(self, times: i64) -> Self {
        Self(self.0 * Ratio::from_integer(times))
    }
}

impl FromStr for Fraction {
    type Err = MiningError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MiningError::BadFraction(s.to_string());
        let s = s.trim();
        let value = if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ratio::new(n, d)
        } else {
            let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
            if (whole.is_empty() && frac.is_empty()) || whole.starts_with(['-', '+']) {
                return Err(bad());
            }
            if frac.len() > 12 || !frac.chars().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            let whole: i64 = if whole.is_empty() {
                0
            } else {
                whole.parse().map_err(|_| bad())?
            };
            let scale = 10i64.pow(frac.len() as u32);
            let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
            Ratio::new(whole * scale + frac, scale)
        };
        if value < Ratio::from_integer(0) {
            return Err(bad());
        }
        Ok(Self(value))
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiningParams {
    pub upper_bound_support: Fraction,
    pub lower_bound_support: Fraction,
    /// Support decrement between rounds.
    pub delta: Fraction,
    pub min_confidence: Fraction,
    /// Stop lowering support once this many frequent itemsets are found.
    pub required_itemsets: usize,
}

impl Default for MiningParams {
    fn default() -> Self {
        Self {
            upper_bound_support: Fraction::one(),
            lower_bound_support: Fraction::new(1, 10),
            delta: Fraction::new(1, 20),
            min_confidence: Fraction::new(9, 10),
            required_itemsets: 10,
        }
    }
}

impl MiningParams {
    pub fn validate(&self) -> Result<(), MiningError> {
        if self.lower_bound_support > self.upper_bound_support {
            return Err(MiningError::BadParams("lower bound support exceeds upper bound"));
        }
        if self.upper_bound_support > Fraction::one() {
            return Err(MiningError::BadParams("upper bound support exceeds 1"));
        }
        if self.delta <= Fraction::zero() {
            return Err(MiningError::BadParams("delta must be positive"));
        }
        if self.min_confidence > Fraction::one() {
            return Err(MiningError::BadParams("min confidence exceeds 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Itemset {
    /// Sorted, distinct page ids.
    pub items: Vec<usize>,
    pub support_count: usize,
}

/// Frequent itemsets at the support level where mining stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequentItemsets {
    pub itemsets: Vec<Itemset>,
    pub support: Fraction,
    pub min_support_count: usize,
    pub transactions: usize,
    /// Support levels tried, including the final one.
    pub rounds: usize,
}

/// Rule confidence kept as the two counts it is made of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Confidence {
    pub union_count: usize,
    pub antecedent_count: usize,
}

impl Confidence {
    pub fn to_f64(self) -> f64 {
        self.union_count as f64 / self.antecedent_count as f64
    }

    pub fn at_least(self, threshold: Fraction) -> bool {
        // union/antecedent >= numer/denom
        self.union_count as i128 * threshold.denom() as i128
            >= threshold.numer() as i128 * self.antecedent_count as i128
    }
}

impl Ord for Confidence {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.union_count as u128 * other.antecedent_count as u128)
            .cmp(&(other.union_count as u128 * self.antecedent_count as u128))
    }
}

impl PartialOrd for Confidence {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Confidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.union_count, self.antecedent_count)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub antecedent: Vec<usize>,
    pub consequent: Vec<usize>,
    /// Support count of antecedent ∪ consequent.
    pub support_count: usize,
    pub confidence: Confidence,
}

/// A directed page pair proposed by the association rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateLink {
    pub src: usize,
    pub dst: usize,
    pub support_count: usize,
    pub confidence: Confidence,
}

fn item_sets(transactions: &[Transaction]) -> Vec<Vec<usize>> {
    transactions
        .iter()
        .map(|t| t.items.iter().copied().collect())
        .collect()
}

fn is_subset(small: &[usize], large: &[usize]) -> bool {
    let mut it = large.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

/// Classic level-wise Apriori at a fixed absolute support count.
pub fn frequent_at_count(transactions: &[Transaction], min_count: usize) -> Vec<Itemset> {
    let rows = item_sets(transactions);
    let min_count = min_count.max(1);

    let mut singles: BTreeMap<usize, usize> = BTreeMap::new();
    for row in &rows {
        for &item in row {
            *singles.entry(item).or_default() += 1;
        }
    }
    let mut level: Vec<Itemset> = singles
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(item, c)| Itemset {
            items: vec![item],
            support_count: c,
        })
        .collect();

    let mut all = Vec::new();
    while !level.is_empty() {
        let known: HashSet<&[usize]> = level.iter().map(|s| s.items.as_slice()).collect();
        let mut candidates: Vec<Vec<usize>> = Vec::new();
        for (a_idx, a) in level.iter().enumerate() {
            for b in &level[a_idx + 1..] {
                let prefix = a.items.len() - 1;
                if a.items[..prefix] != b.items[..prefix] {
                    // level is sorted, so no later b shares a's prefix
                    break;
                }
                let mut joined = a.items.clone();
                joined.push(b.items[prefix]);
                let closed = (0..joined.len()).all(|skip| {
                    let subset: Vec<usize> = joined
                        .iter()
                        .enumerate()
                        .filter_map(|(i, &x)| (i != skip).then_some(x))
                        .collect();
                    known.contains(subset.as_slice())
                });
                if closed {
                    candidates.push(joined);
                }
            }
        }
        let mut counts = vec![0usize; candidates.len()];
        for row in &rows {
            for (c, candidate) in candidates.iter().enumerate() {
                if is_subset(candidate, row) {
                    counts[c] += 1;
                }
            }
        }
        let next: Vec<Itemset> = candidates
            .into_iter()
            .zip(counts)
            .filter(|&(_, c)| c >= min_count)
            .map(|(items, support_count)| Itemset {
                items,
                support_count,
            })
            .collect();
        all.append(&mut level);
        level = next;
    }
    all
}

/// Mines frequent itemsets, starting at the upper support bound and lowering
/// it by `delta` until `required_itemsets` are found or the next level would
/// drop below the lower bound.
pub fn mine_frequent(
    transactions: &[Transaction],
    params: &MiningParams,
) -> Result<FrequentItemsets, MiningError> {
    if transactions.is_empty() {
        return Err(MiningError::NoTransactions);
    }
    params.validate()?;
    let total = transactions.len();
    let mut round = 0i64;
    loop {
        let support = params
            .upper_bound_support
            .checked_sub(params.delta.scaled(round));
        let min_count = support.min_count(total);
        let itemsets = frequent_at_count(transactions, min_count);
        let next = support.checked_sub(params.delta);
        if itemsets.len() >= params.required_itemsets || next < params.lower_bound_support {
            return Ok(FrequentItemsets {
                itemsets,
                support,
                min_support_count: min_count,
                transactions: total,
                rounds: round as usize + 1,
            });
        }
        round += 1;
    }
}

/// Emits every rule `X ⇒ Y` from itemsets of size ≥ 2 whose confidence
/// reaches `min_confidence`. Rules are ordered by support and confidence
/// (both descending), then by antecedent and consequent.
pub fn generate_rules(itemsets: &[Itemset], min_confidence: Fraction) -> Vec<Rule> {
    let counts: HashMap<&[usize], usize> = itemsets
        .iter()
        .map(|s| (s.items.as_slice(), s.support_count))
        .collect();
    let mut rules = Vec::new();
    for set in itemsets.iter().filter(|s| s.items.len() >= 2) {
        let width = set.items.len();
        for mask in 1..(1u64 << width) - 1 {
            let (antecedent, consequent): (Vec<usize>, Vec<usize>) = {
                let mut a = Vec::new();
                let mut c = Vec::new();
                for (bit, &item) in set.items.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        a.push(item);
                    } else {
                        c.push(item);
                    }
                }
                (a, c)
            };
            let Some(&antecedent_count) = counts.get(antecedent.as_slice()) else {
                continue;
            };
            let confidence = Confidence {
                union_count: set.support_count,
                antecedent_count,
            };
            if confidence.at_least(min_confidence) {
                rules.push(Rule {
                    antecedent,
                    consequent,
                    support_count: set.support_count,
                    confidence,
                });
            }
        }
    }
    rules.sort_by(|a, b| {
        b.support_count
            .cmp(&a.support_count)
            .then(b.confidence.cmp(&a.confidence))
            .then_with(|| a.antecedent.cmp(&b.antecedent))
            .then_with(|| a.consequent.cmp(&b.consequent))
    });
    rules
}

/// Majority order of first occurrences of `a` and `b` across sequences:
/// positive when `a` usually comes first.
fn first_occurrence_balance(a: usize, b: usize, transactions: &[Transaction]) -> i64 {
    transactions
        .iter()
        .filter_map(|t| {
            let pa = t.sequence.iter().position(|&x| x == a)?;
            let pb = t.sequence.iter().position(|&x| x == b)?;
            Some(match pa.cmp(&pb) {
                Ordering::Less => 1,
                Ordering::Greater => -1,
                Ordering::Equal => 0,
            })
        })
        .sum()
}

/// The rules `a ⇒ b` and `b ⇒ a` for a pair `a < b`, when present.
type DirectedRules<'a> = (Option<&'a Rule>, Option<&'a Rule>);

/// Turns singleton ⇒ singleton rules into one directed link per page pair.
/// The direction with higher confidence wins; on a tie, the order in which
/// the pages are usually first visited decides, then the lower page id.
pub fn extract_candidate_links(rules: &[Rule], transactions: &[Transaction]) -> Vec<CandidateLink> {
    let mut pairs: BTreeMap<(usize, usize), DirectedRules> = BTreeMap::new();
    for rule in rules {
        let ([i], [j]) = (rule.antecedent.as_slice(), rule.consequent.as_slice()) else {
            continue;
        };
        let (lo, hi) = ((*i).min(*j), (*i).max(*j));
        let slot = pairs.entry((lo, hi)).or_default();
        if *i == lo {
            slot.0 = Some(rule);
        } else {
            slot.1 = Some(rule);
        }
    }

    let mut links: Vec<CandidateLink> = pairs
        .into_iter()
        .map(|((lo, hi), rules)| {
            let forward = match rules {
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (Some(f), Some(b)) => match f.confidence.cmp(&b.confidence) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => first_occurrence_balance(lo, hi, transactions) >= 0,
                },
                (None, None) => unreachable!("pair recorded without a rule"),
            };
            let (rule, src, dst) = if forward {
                (rules.0.expect("forward rule"), lo, hi)
            } else {
                (rules.1.expect("backward rule"), hi, lo)
            };
            CandidateLink {
                src,
                dst,
                support_count: rule.support_count,
                confidence: rule.confidence,
            }
        })
        .collect();
    sort_links(&mut links);
    links
}

/// Support descending, confidence descending, then (src, dst).
pub fn sort_links(links: &mut [CandidateLink]) {
    links.sort_by(|a, b| {
        b.support_count
            .cmp(&a.support_count)
            .then(b.confidence.cmp(&a.confidence))
            .then(a.src.cmp(&b.src))
            .then(a.dst.cmp(&b.dst))
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    // A=0 B=1 C=2 E=4 J=9 K=10
    fn abcejk_transactions() -> Vec<Transaction> {
        [vec![0, 1, 4, 10], vec![0, 2, 9, 10], vec![0, 1, 4, 0, 9, 10]]
            .into_iter()
            .map(Transaction::from_sequence)
            .collect()
    }

    fn support_of(sets: &[Itemset], items: &[usize]) -> Option<usize> {
        sets.iter().find(|s| s.items == items).map(|s| s.support_count)
    }

    #[test]
    fn fraction_parsing() {
        assert_eq!("0.05".parse::<Fraction>().unwrap(), Fraction::new(1, 20));
        assert_eq!("2/3".parse::<Fraction>().unwrap(), Fraction::new(2, 3));
        assert_eq!("1".parse::<Fraction>().unwrap(), Fraction::one());
        assert_eq!(".5".parse::<Fraction>().unwrap(), Fraction::new(1, 2));
        for bad in ["", "x", "1/0", "-0.5", "0.5.5", "1e-3"] {
            assert!(bad.parse::<Fraction>().is_err(), "{bad}");
        }
        assert_eq!(Fraction::new(2, 3).min_count(3), 2);
        assert_eq!(Fraction::new(1, 10).min_count(15), 2);
        assert_eq!(Fraction::zero().min_count(15), 1);
    }

    #[test]
    fn abcejk_example_singletons() {
        let sets = frequent_at_count(&abcejk_transactions(), Fraction::new(2, 3).min_count(3));
        let singles: Vec<(usize, usize)> = sets
            .iter()
            .filter(|s| s.items.len() == 1)
            .map(|s| (s.items[0], s.support_count))
            .collect();
        assert_eq!(singles, vec![(0, 3), (1, 2), (4, 2), (9, 2), (10, 3)]);
        assert_eq!(support_of(&sets, &[2]), None);
        let largest = sets.iter().max_by_key(|s| s.items.len()).unwrap();
        assert_eq!(largest.items, vec![0, 1, 4, 10]);
        assert_eq!(largest.support_count, 2);
    }

    #[test]
    fn abcejk_example_rules_and_links() {
        let tx = abcejk_transactions();
        let sets = frequent_at_count(&tx, 2);
        let rules = generate_rules(&sets, Fraction::zero());
        let find = |a: usize, c: usize| {
            rules
                .iter()
                .find(|r| r.antecedent == [a] && r.consequent == [c])
                .map(|r| r.confidence)
        };
        let e_k = find(4, 10).unwrap();
        let k_e = find(10, 4).unwrap();
        assert_eq!((e_k.union_count, e_k.antecedent_count), (2, 2));
        assert_eq!((k_e.union_count, k_e.antecedent_count), (2, 3));

        let strict = generate_rules(&sets, Fraction::one());
        assert!(strict.iter().any(|r| r.antecedent == [4] && r.consequent == [10]));
        assert!(!strict.iter().any(|r| r.antecedent == [10] && r.consequent == [4]));

        let links = extract_candidate_links(&rules, &tx);
        assert!(links.iter().any(|l| (l.src, l.dst) == (4, 10)));
        assert!(!links.iter().any(|l| (l.src, l.dst) == (10, 4)));
    }

    #[test]
    fn confidence_tie_uses_visit_order() {
        let tx: Vec<Transaction> = [vec![3, 7], vec![3, 7], vec![7, 3]]
            .into_iter()
            .map(Transaction::from_sequence)
            .collect();
        let rules = generate_rules(&frequent_at_count(&tx, 1), Fraction::zero());
        let links = extract_candidate_links(&rules, &tx);
        assert_eq!(links.len(), 1);
        assert_eq!((links[0].src, links[0].dst), (3, 7));

        let tx: Vec<Transaction> = [vec![3, 7], vec![7, 3], vec![7, 3]]
            .into_iter()
            .map(Transaction::from_sequence)
            .collect();
        let links = extract_candidate_links(&rules, &tx);
        assert_eq!((links[0].src, links[0].dst), (7, 3));

        let tx: Vec<Transaction> = [vec![3, 7], vec![7, 3]]
            .into_iter()
            .map(Transaction::from_sequence)
            .collect();
        let links = extract_candidate_links(&rules, &tx);
        assert_eq!((links[0].src, links[0].dst), (3, 7));
    }

    #[test]
    fn no_singleton_rules_means_no_links() {
        let rule = Rule {
            antecedent: vec![1, 2],
            consequent: vec![3],
            support_count: 2,
            confidence: Confidence { union_count: 2, antecedent_count: 2 },
        };
        assert!(extract_candidate_links(&[rule], &[]).is_empty());
        assert!(extract_candidate_links(&[], &[]).is_empty());
    }

    #[test]
    fn delta_schedule_lowers_support_until_enough() {
        let tx = abcejk_transactions();
        let params = MiningParams {
            required_itemsets: 6,
            ..MiningParams::default()
        };
        let found = mine_frequent(&tx, &params).unwrap();
        // 1.0 -> 2 itemsets, 0.95 .. 0.70 -> still 3/3 needed, 0.65 -> 2/3
        assert_eq!(found.support, Fraction::new(13, 20));
        assert_eq!(found.min_support_count, 2);
        assert_eq!(found.rounds, 8);
        assert!(found.itemsets.len() >= 6);
    }

    #[test]
    fn delta_schedule_stops_at_lower_bound() {
        let tx = abcejk_transactions();
        let params = MiningParams {
            lower_bound_support: Fraction::new(9, 10),
            required_itemsets: 1000,
            ..MiningParams::default()
        };
        let found = mine_frequent(&tx, &params).unwrap();
        assert_eq!(found.support, Fraction::new(9, 10));
        assert_eq!(found.rounds, 3);
    }

    #[test]
    fn mining_errors() {
        assert_eq!(
            mine_frequent(&[], &MiningParams::default()),
            Err(MiningError::NoTransactions)
        );
        let bad = MiningParams {
            delta: Fraction::zero(),
            ..MiningParams::default()
        };
        assert!(mine_frequent(&abcejk_transactions(), &bad).is_err());
    }
}
