//! Cards, deck handling, and seven-card hand evaluation.
//!
//! Cards are totally ordered by (rank, suit) with suits ordered
//! clubs < diamonds < hearts < spades. Hand ranks pack the category and
//! kickers into a single integer so two hands compare with one integer
//! comparison.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Card rank, deuce through ace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Rank {
    Two = 2,
    Three = 3,
    Four = 4,
    Five = 5,
    Six = 6,
    Seven = 7,
    Eight = 8,
    Nine = 9,
    Ten = 10,
    Jack = 11,
    Queen = 12,
    King = 13,
    Ace = 14,
}

impl Rank {
    pub const ALL: [Rank; 13] = [
        Rank::Two,
        Rank::Three,
        Rank::Four,
        Rank::Five,
        Rank::Six,
        Rank::Seven,
        Rank::Eight,
        Rank::Nine,
        Rank::Ten,
        Rank::Jack,
        Rank::Queen,
        Rank::King,
        Rank::Ace,
    ];

    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn from_value(v: u8) -> Option<Rank> {
        Rank::ALL.get(v.checked_sub(2)? as usize).copied()
    }

    fn symbol(self) -> char {
        match self {
            Rank::Ten => 'T',
            Rank::Jack => 'J',
            Rank::Queen => 'Q',
            Rank::King => 'K',
            Rank::Ace => 'A',
            r => (b'0' + r.value()) as char,
        }
    }

    fn from_symbol(c: char) -> Option<Rank> {
        match c.to_ascii_uppercase() {
            'T' => Some(Rank::Ten),
            'J' => Some(Rank::Jack),
            'Q' => Some(Rank::Queen),
            'K' => Some(Rank::King),
            'A' => Some(Rank::Ace),
            c @ '2'..='9' => Rank::from_value(c as u8 - b'0'),
            _ => None,
        }
    }
}

/// Card suit. Order clubs < diamonds < hearts < spades is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Suit {
    Clubs = 0,
    Diamonds = 1,
    Hearts = 2,
    Spades = 3,
}

impl Suit {
    pub const ALL: [Suit; 4] = [Suit::Clubs, Suit::Diamonds, Suit::Hearts, Suit::Spades];

    fn symbol(self) -> char {
        match self {
            Suit::Clubs => 'c',
            Suit::Diamonds => 'd',
            Suit::Hearts => 'h',
            Suit::Spades => 's',
        }
    }

    fn from_symbol(c: char) -> Option<Suit> {
        match c.to_ascii_lowercase() {
            'c' => Some(Suit::Clubs),
            'd' => Some(Suit::Diamonds),
            'h' => Some(Suit::Hearts),
            's' => Some(Suit::Spades),
            _ => None,
        }
    }
}

/// One of the 52 playing cards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Card {
    pub rank: Rank,
    pub suit: Suit,
}

impl Card {
    pub fn new(rank: Rank, suit: Suit) -> Card {
        Card { rank, suit }
    }

    /// Dense index in 0..52, ordered by (rank, suit).
    pub fn index(self) -> usize {
        (self.rank.value() as usize - 2) * 4 + self.suit as usize
    }

    pub fn from_index(i: usize) -> Option<Card> {
        if i >= 52 {
            return None;
        }
        Some(Card {
            rank: Rank::from_value((i / 4) as u8 + 2)?,
            suit: Suit::ALL[i % 4],
        })
    }

    /// Parses the two-character form, e.g. "As", "Td", "2c".
    pub fn parse(s: &str) -> Option<Card> {
        let mut chars = s.chars();
        let rank = Rank::from_symbol(chars.next()?)?;
        let suit = Suit::from_symbol(chars.next()?)?;
        if chars.next().is_some() {
            return None;
        }
        Some(Card { rank, suit })
    }
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.rank.symbol(), self.suit.symbol())
    }
}

/// Parses a whitespace- or comma-separated card list, e.g. "Ah Kd" or "Ah,Kd".
pub fn parse_cards(s: &str) -> Option<Vec<Card>> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(Card::parse)
        .collect()
}

/// A full 52-card deck in index order.
pub fn full_deck() -> Vec<Card> {
    (0..52).map(|i| Card::from_index(i).unwrap()).collect()
}

/// Remaining deck after removing `used`, preserving index order.
pub fn deck_without(used: &[Card]) -> Vec<Card> {
    let mut taken = [false; 52];
    for c in used {
        taken[c.index()] = true;
    }
    (0..52)
        .filter(|&i| !taken[i])
        .map(|i| Card::from_index(i).unwrap())
        .collect()
}

/// Hand categories in ascending strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum HandCategory {
    HighCard = 0,
    Pair = 1,
    TwoPair = 2,
    ThreeOfAKind = 3,
    Straight = 4,
    Flush = 5,
    FullHouse = 6,
    FourOfAKind = 7,
    StraightFlush = 8,
}

/// Totally ordered strength of a best-five-card hand.
///
/// The packed value is `category << 20 | r1 << 16 | r2 << 12 | r3 << 8 |
/// r4 << 4 | r5` with tiebreak ranks in significance order, so comparing two
/// `HandRank`s compares the hands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HandRank(pub u32);

impl HandRank {
    fn pack(category: HandCategory, tiebreaks: &[u8]) -> HandRank {
        debug_assert!(tiebreaks.len() <= 5);
        let mut v = (category as u32) << 20;
        for (i, &r) in tiebreaks.iter().enumerate() {
            v |= (r as u32) << (16 - 4 * i);
        }
        HandRank(v)
    }

    pub fn category(self) -> HandCategory {
        match self.0 >> 20 {
            0 => HandCategory::HighCard,
            1 => HandCategory::Pair,
            2 => HandCategory::TwoPair,
            3 => HandCategory::ThreeOfAKind,
            4 => HandCategory::Straight,
            5 => HandCategory::Flush,
            6 => HandCategory::FullHouse,
            7 => HandCategory::FourOfAKind,
            _ => HandCategory::StraightFlush,
        }
    }

    /// Tiebreak ranks in significance order (zero nibbles trimmed).
    pub fn tiebreaks(self) -> Vec<u8> {
        (0..5)
            .map(|i| ((self.0 >> (16 - 4 * i)) & 0xF) as u8)
            .filter(|&r| r != 0)
            .collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HandEvalError {
    #[error("hand evaluation needs 5 to 7 cards, got {0}")]
    WrongCardCount(usize),
    #[error("duplicate card {0} in hand")]
    DuplicateCard(Card),
}

/// Evaluates the best five-card hand from 5-7 distinct cards.
pub fn evaluate_hand(cards: &[Card]) -> Result<HandRank, HandEvalError> {
    if !(5..=7).contains(&cards.len()) {
        return Err(HandEvalError::WrongCardCount(cards.len()));
    }
    let mut seen = [false; 52];
    let mut rank_counts = [0u8; 15];
    let mut suit_counts = [0u8; 4];
    let mut suit_masks = [0u16; 4];
    let mut rank_mask = 0u16;
    for &c in cards {
        if seen[c.index()] {
            return Err(HandEvalError::DuplicateCard(c));
        }
        seen[c.index()] = true;
        let r = c.rank.value();
        rank_counts[r as usize] += 1;
        suit_counts[c.suit as usize] += 1;
        suit_masks[c.suit as usize] |= 1 << r;
        rank_mask |= 1 << r;
    }

    if let Some(s) = (0..4).find(|&s| suit_counts[s] >= 5) {
        if let Some(high) = straight_high(suit_masks[s]) {
            return Ok(HandRank::pack(HandCategory::StraightFlush, &[high]));
        }
        return Ok(HandRank::pack(
            HandCategory::Flush,
            &top_ranks(suit_masks[s], 5),
        ));
    }

    let quad = (2..=14u8).rev().find(|&r| rank_counts[r as usize] == 4);
    if let Some(q) = quad {
        let kicker = (2..=14u8)
            .rev()
            .find(|&r| r != q && rank_counts[r as usize] > 0)
            .unwrap();
        return Ok(HandRank::pack(HandCategory::FourOfAKind, &[q, kicker]));
    }

    let trips = (2..=14u8).rev().find(|&r| rank_counts[r as usize] == 3);
    if let Some(t) = trips {
        let pair = (2..=14u8)
            .rev()
            .find(|&r| r != t && rank_counts[r as usize] >= 2);
        if let Some(p) = pair {
            return Ok(HandRank::pack(HandCategory::FullHouse, &[t, p]));
        }
    }

    if let Some(high) = straight_high(rank_mask) {
        return Ok(HandRank::pack(HandCategory::Straight, &[high]));
    }

    if let Some(t) = trips {
        let mut tb = vec![t];
        tb.extend(
            (2..=14u8)
                .rev()
                .filter(|&r| r != t && rank_counts[r as usize] > 0)
                .take(2),
        );
        return Ok(HandRank::pack(HandCategory::ThreeOfAKind, &tb));
    }

    let pairs: Vec<u8> = (2..=14u8)
        .rev()
        .filter(|&r| rank_counts[r as usize] == 2)
        .collect();
    match pairs.len() {
        0 => Ok(HandRank::pack(
            HandCategory::HighCard,
            &top_ranks(rank_mask, 5),
        )),
        1 => {
            let p = pairs[0];
            let mut tb = vec![p];
            tb.extend(
                (2..=14u8)
                    .rev()
                    .filter(|&r| r != p && rank_counts[r as usize] > 0)
                    .take(3),
            );
            Ok(HandRank::pack(HandCategory::Pair, &tb))
        }
        _ => {
            let (hi, lo) = (pairs[0], pairs[1]);
            let kicker = (2..=14u8)
                .rev()
                .find(|&r| r != hi && r != lo && rank_counts[r as usize] > 0)
                .unwrap();
            Ok(HandRank::pack(HandCategory::TwoPair, &[hi, lo, kicker]))
        }
    }
}

/// Highest straight top card in a rank bitmask, treating the ace as low for
/// the wheel. None if no straight.
fn straight_high(mask: u16) -> Option<u8> {
    let with_low_ace = if mask & (1 << 14) != 0 { mask | (1 << 1) } else { mask };
    (5..=14u8)
        .rev()
        .find(|&high| {
            let run = 0b11111u16 << (high - 4);
            with_low_ace & run == run
        })
}

fn top_ranks(mask: u16, n: usize) -> Vec<u8> {
    (2..=14u8)
        .rev()
        .filter(|&r| mask & (1 << r) != 0)
        .take(n)
        .collect()
}
