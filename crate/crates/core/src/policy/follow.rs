use std::collections::VecDeque;
use std::io::Write;

/// Slack for the floor in the discounted counts, so sums that are integers
/// mathematically are not pushed below by rounding.
const FLOOR_SLACK: f64 = 1e-9;

/// Discounted follow counts for one client's window.
///
/// `outcomes` runs oldest to newest; only the last `window + 1` are used and
/// the newest has lag 0. Returns `(c1, floor(Σ gamma^lag))` for every
/// followed client with a non-zero count, sorted by client.
pub fn lfrus_weighting(outcomes: &[Option<usize>], gamma: f64, window: usize) -> Vec<(usize, u32)> {
    let start = outcomes.len().saturating_sub(window + 1);
    let mut sums: Vec<(usize, f64)> = Vec::new();
    for (lag, outcome) in outcomes[start..].iter().rev().enumerate() {
        if let Some(c1) = *outcome {
            let w = gamma.powi(lag as i32);
            match sums.iter_mut().find(|(c, _)| *c == c1) {
                Some((_, s)) => *s += w,
                None => sums.push((c1, w)),
            }
        }
    }
    let mut out: Vec<(usize, u32)> = sums
        .into_iter()
        .map(|(c, s)| (c, (s + FLOOR_SLACK).floor() as u32))
        .filter(|&(_, n)| n > 0)
        .collect();
    out.sort_unstable();
    out
}

/// Following-event bookkeeping: per-client outcome windows, the matrix `F`
/// and the last requester of every identity.
///
/// `F[c1][c2]` counts how often `c2` followed `c1` within `c2`'s last
/// `window + 1` requests. A request follows `c1` when it hits and `c1`, a
/// different client, was the last one to request the identity. With a
/// `gamma` the counts are discounted by `gamma^lag` and floored.
#[derive(Debug, Clone)]
pub struct FollowTracker {
    window: usize,
    gamma: Option<f64>,
    windows: Vec<VecDeque<Option<usize>>>,
    /// Row-major `clients × clients`.
    matrix: Vec<u32>,
    row_max: Vec<u32>,
    clients: usize,
    last: Vec<Option<usize>>,
}

impl FollowTracker {
    pub fn new(window: usize, gamma: Option<f64>) -> Self {
        FollowTracker {
            window,
            gamma,
            windows: Vec::new(),
            matrix: Vec::new(),
            row_max: Vec::new(),
            clients: 0,
            last: Vec::new(),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn clients(&self) -> usize {
        self.clients
    }

    fn grow_clients(&mut self, n: usize) {
        if n <= self.clients {
            return;
        }
        let mut m = vec![0; n * n];
        for a in 0..self.clients {
            for b in 0..self.clients {
                m[a * n + b] = self.matrix[a * self.clients + b];
            }
        }
        self.matrix = m;
        self.row_max.resize(n, 0);
        self.windows.resize(n, VecDeque::new());
        self.clients = n;
    }

    /// Logs one main-cache request by `client` for `key`, given whether it
    /// hit. Must run before the residency update. Returns the followed
    /// client, if any.
    pub fn record(&mut self, client: usize, key: usize, hit: bool) -> Option<usize> {
        self.grow_clients(client + 1);
        if self.last.len() <= key {
            self.last.resize(key + 1, None);
        }
        let outcome = self.last[key].filter(|&c1| hit && c1 != client);
        self.last[key] = Some(client);
        if let Some(c1) = outcome {
            self.grow_clients(c1 + 1);
        }

        let win = &mut self.windows[client];
        win.push_back(outcome);
        let dropped = if win.len() > self.window + 1 {
            win.pop_front().flatten()
        } else {
            None
        };

        match self.gamma {
            None => {
                if let Some(c1) = outcome {
                    self.bump(c1, client, 1);
                }
                if let Some(c1) = dropped {
                    self.bump(c1, client, -1);
                }
            }
            Some(g) => {
                let outcomes: Vec<Option<usize>> = self.windows[client].iter().copied().collect();
                let column = lfrus_weighting(&outcomes, g, self.window);
                for c1 in 0..self.clients {
                    let v = column.iter().find(|&&(c, _)| c == c1).map_or(0, |&(_, v)| v);
                    self.set(c1, client, v);
                }
            }
        }
        outcome
    }

    fn bump(&mut self, c1: usize, c2: usize, delta: i32) {
        let i = c1 * self.clients + c2;
        let v = (self.matrix[i] as i64 + delta as i64) as u32;
        self.set(c1, c2, v);
    }

    fn set(&mut self, c1: usize, c2: usize, v: u32) {
        let i = c1 * self.clients + c2;
        let old = self.matrix[i];
        if old == v {
            return;
        }
        self.matrix[i] = v;
        if v > self.row_max[c1] {
            self.row_max[c1] = v;
        } else if old == self.row_max[c1] {
            let row = &self.matrix[c1 * self.clients..(c1 + 1) * self.clients];
            self.row_max[c1] = row.iter().copied().max().unwrap_or(0);
        }
    }

    /// `F[c1][c2]`: times `c2` followed `c1` in `c2`'s window.
    pub fn entry(&self, c1: usize, c2: usize) -> u32 {
        if c1 < self.clients && c2 < self.clients {
            self.matrix[c1 * self.clients + c2]
        } else {
            0
        }
    }

    /// Largest number of times any single client followed `c`.
    pub fn row_score(&self, c: usize) -> u32 {
        self.row_max.get(c).copied().unwrap_or(0)
    }

    pub fn row_scores(&self) -> &[u32] {
        &self.row_max
    }

    /// Stored outcomes of `client`, oldest first.
    pub fn outcomes(&self, client: usize) -> Vec<Option<usize>> {
        self.windows
            .get(client)
            .map(|w| w.iter().copied().collect())
            .unwrap_or_default()
    }

    /// Client that last requested `key` over the whole history.
    pub fn last_requester(&self, key: usize) -> Option<usize> {
        self.last.get(key).copied().flatten()
    }

    /// Non-zero entries as `c1,c2,count` rows, client ids 1-based.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "c1,c2,count")?;
        for a in 0..self.clients {
            for b in 0..self.clients {
                let v = self.entry(a, b);
                if v > 0 {
                    writeln!(out, "{},{},{}", a + 1, b + 1, v)?;
                }
            }
        }
        Ok(())
    }
}
