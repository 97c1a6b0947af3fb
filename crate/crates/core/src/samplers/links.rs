//! The ddCRP link graph with reverse adjacency for component searches.

#[derive(Debug, Clone)]
pub(crate) struct LinkGraph {
    pub links: Vec<usize>,
    /// `incoming[j]`: every `i` with `links[i] == j`.
    incoming: Vec<Vec<usize>>,
    stamp: Vec<u32>,
    epoch: u32,
    queue: Vec<usize>,
}

impl LinkGraph {
    pub fn self_links(n: usize) -> Self {
        Self {
            links: (0..n).collect(),
            incoming: (0..n).map(|i| vec![i]).collect(),
            stamp: vec![0; n],
            epoch: 0,
            queue: Vec::with_capacity(n),
        }
    }

    /// Detaches the outgoing edge of `i`, leaving `i` self-linked, and returns
    /// the previous target.
    pub fn detach(&mut self, i: usize) -> usize {
        let old = self.links[i];
        let list = &mut self.incoming[old];
        let p = list
            .iter()
            .position(|&x| x == i)
            .expect("incoming lists mirror links");
        list.swap_remove(p);
        self.links[i] = i;
        self.incoming[i].push(i);
        old
    }

    /// Replaces the self-link of `i` (set by [`detach`]) with `i -> target`.
    pub fn attach(&mut self, i: usize, target: usize) {
        debug_assert_eq!(self.links[i], i);
        if target == i {
            return;
        }
        let list = &mut self.incoming[i];
        let p = list.iter().position(|&x| x == i).expect("self-link present");
        list.swap_remove(p);
        self.links[i] = target;
        self.incoming[target].push(i);
    }

    /// Undirected search from `start`. Returns `true` as soon as `stop` is
    /// reached; otherwise the whole component is visited and its members are
    /// left in [`visited`](Self::visited).
    pub fn search(&mut self, start: usize, stop: Option<usize>) -> bool {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        self.queue.clear();
        self.queue.push(start);
        self.stamp[start] = epoch;
        let mut head = 0;
        while head < self.queue.len() {
            let v = self.queue[head];
            head += 1;
            if Some(v) == stop {
                return true;
            }
            let out = self.links[v];
            if self.stamp[out] != epoch {
                self.stamp[out] = epoch;
                self.queue.push(out);
            }
            for idx in 0..self.incoming[v].len() {
                let u = self.incoming[v][idx];
                if self.stamp[u] != epoch {
                    self.stamp[u] = epoch;
                    self.queue.push(u);
                }
            }
        }
        false
    }

    pub fn visited(&self) -> &[usize] {
        &self.queue
    }

    pub fn is_consistent(&self) -> bool {
        let mut count = vec![0usize; self.links.len()];
        for (j, list) in self.incoming.iter().enumerate() {
            for &i in list {
                if self.links[i] != j {
                    return false;
                }
                count[i] += 1;
            }
        }
        count.iter().all(|&c| c == 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detach_attach_and_search() {
        let mut g = LinkGraph::self_links(5);
        g.detach(0);
        g.attach(0, 1);
        g.detach(1);
        g.attach(1, 2);
        g.detach(3);
        g.attach(3, 4);
        assert!(g.is_consistent());
        assert_eq!(g.links, vec![1, 2, 2, 4, 4]);
        assert!(g.search(0, Some(2)));
        assert!(!g.search(0, Some(3)));
        let mut comp = g.visited().to_vec();
        comp.sort();
        assert_eq!(comp, vec![0, 1, 2]);
        let old = g.detach(1);
        assert_eq!(old, 2);
        assert!(!g.search(0, Some(2)));
        let mut comp = g.visited().to_vec();
        comp.sort();
        assert_eq!(comp, vec![0, 1]);
        assert!(g.is_consistent());
    }
}
