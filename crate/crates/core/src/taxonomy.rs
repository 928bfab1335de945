//! Discipline and subfield registries.
//!
//! References are classified into 144 low-level disciplines. Faculty
//! departments are classified into 24 subfields grouped under six broad
//! fields.

use std::fmt;

/// Number of low-level disciplines in the journal classification.
pub const N_DISCIPLINES: usize = 144;

/// Number of department subfields.
pub const N_SUBFIELDS: usize = 24;

/// A discipline identifier in `1..=144`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DisciplineId(u8);

impl DisciplineId {
    pub fn new(id: u32) -> Option<Self> {
        (1..=N_DISCIPLINES as u32)
            .contains(&id)
            .then(|| Self(id as u8))
    }

    /// Builds an id from a zero-based vector index.
    pub fn from_index(index: usize) -> Option<Self> {
        Self::new(index as u32 + 1)
    }

    pub fn get(self) -> u32 {
        self.0 as u32
    }

    /// Zero-based position in a 144-long vector.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn all() -> impl Iterator<Item = DisciplineId> {
        (1..=N_DISCIPLINES as u8).map(DisciplineId)
    }
}

impl fmt::Display for DisciplineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A subfield identifier in `1..=24`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubfieldId(u8);

impl SubfieldId {
    pub fn new(id: u32) -> Option<Self> {
        (1..=N_SUBFIELDS as u32)
            .contains(&id)
            .then(|| Self(id as u8))
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::new(index as u32 + 1)
    }

    pub fn get(self) -> u32 {
        self.0 as u32
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn all() -> impl Iterator<Item = SubfieldId> {
        (1..=N_SUBFIELDS as u8).map(SubfieldId)
    }

    pub fn name(self) -> &'static str {
        SUBFIELDS[self.index()].0
    }

    pub fn field(self) -> Field {
        SUBFIELDS[self.index()].1
    }
}

impl fmt::Display for SubfieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Broad research fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    MathComputing,
    PhysEng,
    LifeEarth,
    BioHealth,
    SocialSciences,
    Humanities,
}

impl Field {
    pub const ALL: [Field; 6] = [
        Field::MathComputing,
        Field::PhysEng,
        Field::LifeEarth,
        Field::BioHealth,
        Field::SocialSciences,
        Field::Humanities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::MathComputing => "math_computing",
            Field::PhysEng => "phys_eng",
            Field::LifeEarth => "life_earth",
            Field::BioHealth => "bio_health",
            Field::SocialSciences => "social_sciences",
            Field::Humanities => "humanities",
        }
    }

    pub fn parse(s: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.name() == s)
    }

    pub fn subfields(self) -> impl Iterator<Item = SubfieldId> {
        SubfieldId::all().filter(move |s| s.field() == self)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const SUBFIELDS: [(&str, Field); N_SUBFIELDS] = [
    ("Computing", Field::MathComputing),
    ("Math", Field::MathComputing),
    ("Architecture", Field::PhysEng),
    ("Engineering", Field::PhysEng),
    ("Physics", Field::PhysEng),
    ("Agriculture", Field::LifeEarth),
    ("Chemistry", Field::LifeEarth),
    ("Earth", Field::LifeEarth),
    ("Biology", Field::BioHealth),
    ("Health", Field::BioHealth),
    ("Medicine", Field::BioHealth),
    ("Anthropology", Field::SocialSciences),
    ("Business", Field::SocialSciences),
    ("Economics", Field::SocialSciences),
    ("Education", Field::SocialSciences),
    ("Journalism", Field::SocialSciences),
    ("Politics", Field::SocialSciences),
    ("Psychology", Field::SocialSciences),
    ("Sociology", Field::SocialSciences),
    ("Arts", Field::Humanities),
    ("History", Field::Humanities),
    ("Literature", Field::Humanities),
    ("Philosophy", Field::Humanities),
    ("Religion", Field::Humanities),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discipline_bounds() {
        assert!(DisciplineId::new(0).is_none());
        assert!(DisciplineId::new(145).is_none());
        assert_eq!(DisciplineId::new(144).unwrap().index(), 143);
        assert_eq!(DisciplineId::from_index(0).unwrap().get(), 1);
    }

    #[test]
    fn subfields_grouped_by_field() {
        assert_eq!(Field::Humanities.subfields().count(), 5);
        assert_eq!(Field::SocialSciences.subfields().count(), 8);
        assert_eq!(SubfieldId::new(6).unwrap().name(), "Agriculture");
        assert_eq!(Field::parse("bio_health"), Some(Field::BioHealth));
    }
}
