use std::collections::VecDeque;

use super::BanditClass;
use crate::linalg::gcd;

/// Condition 1 under a deterministic local policy: every state reaches the
/// ergodic state within `max_t` steps with positive probability, and the chain
/// is aperiodic at the ergodic state.
pub fn check_ergodic(cls: &BanditClass, actions: &[usize], max_t: usize) -> bool {
    let n = cls.state_count;
    let s0 = cls.ergodic_state;
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|s| (0..n).filter(|&x| cls.p(s, actions[s], x) > 0.0).collect())
        .collect();

    // Backward BFS from s0 gives the shortest hitting distance of every state.
    let mut pred = vec![Vec::new(); n];
    for (s, next) in succ.iter().enumerate() {
        for &x in next {
            pred[x].push(s);
        }
    }
    let mut dist = vec![usize::MAX; n];
    dist[s0] = 0;
    let mut queue = VecDeque::from([s0]);
    while let Some(x) = queue.pop_front() {
        for &s in &pred[x] {
            if dist[s] == usize::MAX {
                dist[s] = dist[x] + 1;
                queue.push_back(s);
            }
        }
    }
    if dist.iter().any(|&d| d > max_t) {
        return false;
    }
    period_at(&succ, s0) == 1
}

/// Period of `s0` from BFS levels over the states reachable from it.
/// Every such state reaches `s0` back once reachability has been checked.
fn period_at(succ: &[Vec<usize>], s0: usize) -> usize {
    let n = succ.len();
    let mut level = vec![usize::MAX; n];
    level[s0] = 0;
    let mut queue = VecDeque::from([s0]);
    while let Some(s) = queue.pop_front() {
        for &x in &succ[s] {
            if level[x] == usize::MAX {
                level[x] = level[s] + 1;
                queue.push_back(x);
            }
        }
    }
    let mut g = 0;
    for s in 0..n {
        if level[s] == usize::MAX {
            continue;
        }
        for &x in &succ[s] {
            let diff = (level[s] + 1).abs_diff(level[x]);
            g = gcd(g, diff);
        }
    }
    g
}
