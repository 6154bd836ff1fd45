use std::fmt;

/// One of the three computation servers.
///
/// Server `i` holds the replicated pair `(x_i, x_{i+1})`; indices wrap modulo 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartyId(u8);

impl PartyId {
    pub const P1: PartyId = PartyId(1);
    pub const P2: PartyId = PartyId(2);
    pub const P3: PartyId = PartyId(3);

    pub const ALL: [PartyId; 3] = [Self::P1, Self::P2, Self::P3];

    pub fn new(id: u8) -> Option<PartyId> {
        (1..=3).contains(&id).then_some(PartyId(id))
    }

    /// Zero-based position, handy for indexing `[_; 3]` arrays.
    pub fn from_index(idx: usize) -> PartyId {
        PartyId((idx % 3) as u8 + 1)
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn next(self) -> PartyId {
        PartyId::from_index(self.index() + 1)
    }

    pub fn prev(self) -> PartyId {
        PartyId::from_index(self.index() + 2)
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}
