use std::collections::HashMap;

const PHONES: [&str; 41] = [
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER", "EY", "F", "G", "HH", "IH",
    "IY", "JH", "K", "L", "M", "N", "NG", "OW", "OY", "P", "R", "S", "SH", "T", "TH", "UH", "UW",
    "V", "W", "Y", "Z", "ZH", "SIL", "INH",
];

/// Fixed phone inventory: the 39 CMU phones, silence and inhalation.
#[derive(Debug, Clone)]
pub struct PhonemeDict {
    by_name: HashMap<&'static str, usize>,
}

impl Default for PhonemeDict {
    fn default() -> Self {
        Self::new()
    }
}

impl PhonemeDict {
    pub const SIL: usize = 39;
    pub const INH: usize = 40;

    pub fn new() -> Self {
        let by_name = PHONES.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        PhonemeDict { by_name }
    }

    pub fn len(&self) -> usize {
        PHONES.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Case-insensitive lookup; stress digits are ignored and `sp`/`pau`
    /// are read as silence.
    pub fn index(&self, name: &str) -> Option<usize> {
        let upper = name.trim().trim_end_matches(|c: char| c.is_ascii_digit()).to_ascii_uppercase();
        match upper.as_str() {
            "SP" | "PAU" => Some(Self::SIL),
            other => self.by_name.get(other).copied(),
        }
    }

    pub fn name(&self, index: usize) -> Option<&'static str> {
        PHONES.get(index).copied()
    }

    pub fn is_pause(index: usize) -> bool {
        index == Self::SIL || index == Self::INH
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn has_41_stable_entries() {
        let d = PhonemeDict::new();
        assert_eq!(d.len(), 41);
        for i in 0..41 {
            assert_eq!(d.index(d.name(i).unwrap()), Some(i));
        }
        assert_eq!(d.index("ah"), Some(2));
        assert_eq!(d.index("AH0"), Some(2));
        assert_eq!(d.index("sil"), Some(PhonemeDict::SIL));
        assert_eq!(d.index("sp"), Some(PhonemeDict::SIL));
        assert_eq!(d.index("inh"), Some(PhonemeDict::INH));
        assert_eq!(d.index("xx"), None);
        assert_eq!(d.name(41), None);
    }
}
