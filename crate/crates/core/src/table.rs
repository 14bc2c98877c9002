//! Open-addressing hash table keyed by 64-bit context hashes.
//!
//! Linear probing, power-of-two capacity, doubling once the load factor
//! would exceed 60%. Identity is the hash alone: two contexts whose hashes
//! collide share one slot. Encoder and decoder see the same collisions, so
//! this never breaks decodability.

const MAX_LOAD_NUM: usize = 3;
const MAX_LOAD_DEN: usize = 5;

#[derive(Debug, Clone)]
pub struct HashTable<V> {
    slots: Vec<Option<(u64, V)>>,
    len: usize,
    shift: u32,
}

impl<V> HashTable<V> {
    /// `capacity` is rounded up to a power of two (minimum 8).
    pub fn with_capacity(capacity: usize) -> Self {
        let cap = capacity.max(8).next_power_of_two();
        let mut slots = Vec::with_capacity(cap);
        slots.resize_with(cap, || None);
        HashTable {
            slots,
            len: 0,
            shift: 64 - cap.trailing_zeros(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    #[inline]
    fn home(&self, key: u64) -> usize {
        (key.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> self.shift) as usize
    }

    #[inline]
    fn find(&self, key: u64) -> Result<usize, usize> {
        let mask = self.slots.len() - 1;
        let mut i = self.home(key);
        loop {
            match &self.slots[i] {
                Some((k, _)) if *k == key => return Ok(i),
                Some(_) => i = (i + 1) & mask,
                None => return Err(i),
            }
        }
    }

    pub fn get(&self, key: u64) -> Option<&V> {
        match self.find(key) {
            Ok(i) => self.slots[i].as_ref().map(|(_, v)| v),
            Err(_) => None,
        }
    }

    pub fn get_mut(&mut self, key: u64) -> Option<&mut V> {
        match self.find(key) {
            Ok(i) => self.slots[i].as_mut().map(|(_, v)| v),
            Err(_) => None,
        }
    }

    pub fn contains_key(&self, key: u64) -> bool {
        self.find(key).is_ok()
    }

    /// Returns the value for `key`, inserting `make()` first if absent.
    pub fn get_or_insert_with(&mut self, key: u64, make: impl FnOnce() -> V) -> &mut V {
        let i = match self.find(key) {
            Ok(i) => i,
            Err(_) => {
                if (self.len + 1) * MAX_LOAD_DEN > self.slots.len() * MAX_LOAD_NUM {
                    self.grow();
                }
                let i = self.find(key).unwrap_err();
                self.slots[i] = Some((key, make()));
                self.len += 1;
                i
            }
        };
        &mut self.slots[i].as_mut().unwrap().1
    }

    /// Inserts or overwrites, returning the previous value.
    pub fn insert(&mut self, key: u64, value: V) -> Option<V> {
        match self.find(key) {
            Ok(i) => self.slots[i].replace((key, value)).map(|(_, v)| v),
            Err(_) => {
                self.get_or_insert_with(key, || value);
                None
            }
        }
    }

    fn grow(&mut self) {
        let cap = self.slots.len() * 2;
        let mut slots = Vec::with_capacity(cap);
        slots.resize_with(cap, || None);
        let old = std::mem::replace(&mut self.slots, slots);
        self.shift -= 1;
        for (k, v) in old.into_iter().flatten() {
            let i = self.find(k).unwrap_err();
            self.slots[i] = Some((k, v));
        }
    }

    /// Occupied entries in slot order. Slot order is a pure function of the
    /// insertion sequence, so two tables built identically iterate identically.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &V)> {
        self.slots.iter().flatten().map(|(k, v)| (*k, v))
    }
}
