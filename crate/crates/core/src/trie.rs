//! A binary trie keyed on prefix bits.
//!
//! One trie per address family, nodes held in an arena. Lookups walk at
//! most `len` levels, so finding every stored prefix covering a route costs
//! O(prefix length) regardless of how many prefixes are stored.

use crate::model::{Afi, IpPrefix};

const NONE: u32 = 0;

#[derive(Clone, Debug)]
struct Node<V> {
    children: [u32; 2],
    value: Option<V>,
}

impl<V> Node<V> {
    fn empty() -> Self {
        Node {
            children: [NONE, NONE],
            value: None,
        }
    }
}

#[derive(Clone, Debug)]
struct Arena<V> {
    // nodes[0] is the root; index 0 never appears as a child.
    nodes: Vec<Node<V>>,
}

impl<V> Arena<V> {
    fn new() -> Self {
        Arena {
            nodes: vec![Node::empty()],
        }
    }

    fn find(&self, prefix: &IpPrefix) -> Option<usize> {
        let mut idx = 0usize;
        for i in 0..prefix.len() {
            let next = self.nodes[idx].children[prefix.bit(i) as usize];
            if next == NONE {
                return None;
            }
            idx = next as usize;
        }
        Some(idx)
    }

    fn find_or_create(&mut self, prefix: &IpPrefix) -> usize {
        let mut idx = 0usize;
        for i in 0..prefix.len() {
            let bit = prefix.bit(i) as usize;
            let next = self.nodes[idx].children[bit];
            idx = if next == NONE {
                let new = self.nodes.len();
                self.nodes.push(Node::empty());
                self.nodes[idx].children[bit] = new as u32;
                new
            } else {
                next as usize
            };
        }
        idx
    }
}

/// Map from prefixes to values with covering-prefix lookup.
#[derive(Clone, Debug)]
pub struct PrefixTrie<V> {
    v4: Arena<V>,
    v6: Arena<V>,
    len: usize,
}

impl<V> Default for PrefixTrie<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V> PrefixTrie<V> {
    pub fn new() -> Self {
        PrefixTrie {
            v4: Arena::new(),
            v6: Arena::new(),
            len: 0,
        }
    }

    /// Number of prefixes holding a value.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn arena(&self, afi: Afi) -> &Arena<V> {
        match afi {
            Afi::Ipv4 => &self.v4,
            Afi::Ipv6 => &self.v6,
        }
    }

    fn arena_mut(&mut self, afi: Afi) -> &mut Arena<V> {
        match afi {
            Afi::Ipv4 => &mut self.v4,
            Afi::Ipv6 => &mut self.v6,
        }
    }

    pub fn get(&self, prefix: &IpPrefix) -> Option<&V> {
        let arena = self.arena(prefix.afi());
        arena.find(prefix).and_then(|idx| arena.nodes[idx].value.as_ref())
    }

    pub fn get_mut(&mut self, prefix: &IpPrefix) -> Option<&mut V> {
        let arena = self.arena_mut(prefix.afi());
        match arena.find(prefix) {
            Some(idx) => arena.nodes[idx].value.as_mut(),
            None => None,
        }
    }

    pub fn insert(&mut self, prefix: IpPrefix, value: V) -> Option<V> {
        let arena = self.arena_mut(prefix.afi());
        let idx = arena.find_or_create(&prefix);
        let old = arena.nodes[idx].value.replace(value);
        if old.is_none() {
            self.len += 1;
        }
        old
    }

    pub fn get_or_insert_with(&mut self, prefix: IpPrefix, f: impl FnOnce() -> V) -> &mut V {
        let arena = match prefix.afi() {
            Afi::Ipv4 => &mut self.v4,
            Afi::Ipv6 => &mut self.v6,
        };
        let idx = arena.find_or_create(&prefix);
        let slot = &mut arena.nodes[idx].value;
        if slot.is_none() {
            self.len += 1;
        }
        slot.get_or_insert_with(f)
    }

    /// Removes the value. Interior nodes are left in place.
    pub fn remove(&mut self, prefix: &IpPrefix) -> Option<V> {
        let arena = self.arena_mut(prefix.afi());
        let old = arena.find(prefix).and_then(|idx| arena.nodes[idx].value.take());
        if old.is_some() {
            self.len -= 1;
        }
        old
    }

    /// Every stored prefix covering `prefix` (itself included), shortest
    /// first.
    pub fn covering<'a>(&'a self, prefix: &IpPrefix) -> Covering<'a, V> {
        Covering {
            nodes: &self.arena(prefix.afi()).nodes,
            target: *prefix,
            idx: Some(0),
            depth: 0,
        }
    }

    /// All entries, ordered by family and then by bits (pre-order walk).
    pub fn iter(&self) -> impl Iterator<Item = (IpPrefix, &V)> + '_ {
        let mut out = Vec::with_capacity(self.len);
        for (afi, arena) in [(Afi::Ipv4, &self.v4), (Afi::Ipv6, &self.v6)] {
            // (node, bits so far left-aligned in width, depth)
            let mut stack = vec![(0usize, 0u128, 0u8)];
            while let Some((idx, bits, depth)) = stack.pop() {
                let node = &arena.nodes[idx];
                if let Some(v) = node.value.as_ref() {
                    let prefix = IpPrefix::from_bits(afi, bits, depth)
                        .expect("trie depth never exceeds family width");
                    out.push((prefix, v));
                }
                for bit in [1usize, 0] {
                    let child = node.children[bit];
                    if child != NONE {
                        let shift = afi.max_len() - 1 - depth;
                        let child_bits = bits | ((bit as u128) << shift);
                        stack.push((child as usize, child_bits, depth + 1));
                    }
                }
            }
        }
        out.into_iter()
    }
}

pub struct Covering<'a, V> {
    nodes: &'a [Node<V>],
    target: IpPrefix,
    idx: Option<usize>,
    depth: u8,
}

impl<'a, V> Iterator for Covering<'a, V> {
    type Item = (IpPrefix, &'a V);

    fn next(&mut self) -> Option<Self::Item> {
        while let Some(idx) = self.idx {
            let depth = self.depth;
            let node = &self.nodes[idx];
            self.idx = if depth < self.target.len() {
                let next = node.children[self.target.bit(depth) as usize];
                (next != NONE).then_some(next as usize)
            } else {
                None
            };
            self.depth += 1;
            if let Some(v) = node.value.as_ref() {
                let prefix = self.target.truncate(depth).expect("depth within target");
                return Some((prefix, v));
            }
        }
        None
    }
}
