//! Greedy choice of the routers that cover most of a user's time.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::trace_model::{BssidId, WifiScan};

/// Time bins in which each router was heard.
pub fn user_timebin_sets(scans: &[WifiScan], bin_ms: u64) -> BTreeMap<BssidId, BTreeSet<u64>> {
    assert!(bin_ms > 0, "bin width must be positive");
    let mut sets: BTreeMap<BssidId, BTreeSet<u64>> = BTreeMap::new();
    for s in scans {
        for a in s.sightings() {
            sets.entry(a.bssid).or_default().insert(s.ts.0 / bin_ms);
        }
    }
    sets
}

/// Up to `k` routers picked one at a time, each adding the most not yet
/// covered bins; ties go to the smaller BSSID. Selection keeps going at zero
/// gain until `k` routers are chosen or none remain, so the choice for `k`
/// is a prefix of the choice for `k + 1`.
pub fn greedy_top_routers(scans: &[WifiScan], k: usize, bin_ms: u64) -> Vec<BssidId> {
    let sets = user_timebin_sets(scans, bin_ms);
    let mut covered: BTreeSet<u64> = BTreeSet::new();
    // gains only shrink, so a stale entry is an upper bound (lazy greedy)
    let mut heap: BinaryHeap<(usize, Reverse<BssidId>)> = sets.iter().map(|(b, s)| (s.len(), Reverse(*b))).collect();
    let mut chosen = Vec::with_capacity(k.min(sets.len()));
    while chosen.len() < k {
        let Some((stale, Reverse(b))) = heap.pop() else { break };
        let set = &sets[&b];
        let gain = set.iter().filter(|t| !covered.contains(t)).count();
        if gain == stale {
            covered.extend(set.iter().copied());
            chosen.push(b);
        } else {
            heap.push((gain, Reverse(b)));
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_model::{ApSighting, Timestamp, UserId};

    fn b(x: u8) -> BssidId {
        BssidId::from_octets([2, 0, 0, 0, 0, x])
    }

    fn scan(bin: u64, macs: &[u8]) -> WifiScan {
        let aps = macs.iter().map(|&m| ApSighting::new(b(m), None, None).unwrap()).collect();
        WifiScan::new(UserId::new("u").unwrap(), Timestamp(bin * 1000), aps)
    }

    /// Plain greedy: recompute every gain each round.
    fn naive(scans: &[WifiScan], k: usize) -> Vec<BssidId> {
        let sets = user_timebin_sets(scans, 1000);
        let mut covered = BTreeSet::new();
        let mut out = Vec::new();
        while out.len() < k {
            let best = sets
                .iter()
                .filter(|(b, _)| !out.contains(*b))
                .map(|(b, s)| (s.difference(&covered).count(), Reverse(*b)))
                .max();
            let Some((_, Reverse(b))) = best else { break };
            covered.extend(sets[&b].iter().copied());
            out.push(b);
        }
        out
    }

    #[test]
    fn picks_complementary_router() {
        // 1 covers bins 0..4, 2 covers 0..3, 3 covers 4..5
        let mut scans: Vec<_> = (0..4).map(|t| scan(t, &[1, 2])).collect();
        scans.push(scan(4, &[1, 3]));
        scans.push(scan(5, &[3]));
        assert_eq!(greedy_top_routers(&scans, 2, 1000), vec![b(1), b(3)]);
        // zero-gain router still fills the third slot
        assert_eq!(greedy_top_routers(&scans, 5, 1000), vec![b(1), b(3), b(2)]);
    }

    #[test]
    fn ties_prefer_smaller_bssid() {
        let scans = vec![scan(0, &[7]), scan(1, &[5])];
        assert_eq!(greedy_top_routers(&scans, 1, 1000), vec![b(5)]);
    }

    #[test]
    fn matches_naive_greedy() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as u8
        };
        let scans: Vec<_> = (0..200)
            .map(|t| {
                let n = next() % 4;
                let macs: Vec<u8> = (0..n).map(|_| next() % 25).collect();
                scan(t, &macs)
            })
            .collect();
        for k in [1, 3, 10, 30] {
            assert_eq!(greedy_top_routers(&scans, k, 1000), naive(&scans, k), "k={k}");
        }
    }
}
