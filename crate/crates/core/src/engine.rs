//! No-Limit Texas Hold'em state machine: blinds, four betting streets,
//! action legality and normalization, all-in side pots, and showdown.
//!
//! Raise amounts use raise-to semantics: `Raise { to }` is the total a seat
//! has committed on the current street after the action. Any bet increase
//! reopens action for the other live seats. Busted seats sit out the rest of
//! the battle. No burn cards are dealt.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cards::{evaluate_hand, full_deck, Card, HandRank};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Street {
    Preflop,
    Flop,
    Turn,
    River,
}

impl Street {
    pub const ALL: [Street; 4] = [Street::Preflop, Street::Flop, Street::Turn, Street::River];

    pub fn board_size(self) -> usize {
        match self {
            Street::Preflop => 0,
            Street::Flop => 3,
            Street::Turn => 4,
            Street::River => 5,
        }
    }

    pub fn next(self) -> Option<Street> {
        match self {
            Street::Preflop => Some(Street::Flop),
            Street::Flop => Some(Street::Turn),
            Street::Turn => Some(Street::River),
            Street::River => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Street::Preflop => "preflop",
            Street::Flop => "flop",
            Street::Turn => "turn",
            Street::River => "river",
        }
    }
}

/// A betting action. RAISE carries the raise-to total for the street.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum Action {
    Fold,
    Check,
    Call,
    Raise { to: u64 },
}

impl Action {
    pub fn kind_label(self) -> &'static str {
        match self {
            Action::Fold => "FOLD",
            Action::Check => "CHECK",
            Action::Call => "CALL",
            Action::Raise { .. } => "RAISE",
        }
    }

    pub fn coarse(self) -> CoarseAction {
        match self {
            Action::Fold => CoarseAction::Fold,
            Action::Check | Action::Call => CoarseAction::Call,
            Action::Raise { .. } => CoarseAction::Raise,
        }
    }
}

/// Coarse action class used by change-rate metrics; ordered fold < call < raise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoarseAction {
    Fold,
    Call,
    Raise,
}

impl CoarseAction {
    pub fn label(self) -> &'static str {
        match self {
            CoarseAction::Fold => "fold",
            CoarseAction::Call => "call",
            CoarseAction::Raise => "raise",
        }
    }
}

/// Legal envelope for one decision point. `min_raise` / `max_raise` are
/// raise-to totals; `call_amount` is the additional chips needed to call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalActionSet {
    pub can_fold: bool,
    pub call_amount: u64,
    pub min_raise: u64,
    pub max_raise: u64,
    pub raise_available: bool,
}

/// Maps any proposed action onto an engine-legal one. Total by design:
/// CHECK facing a bet downgrades to FOLD, CHECK (or FOLD) with nothing to
/// call becomes a zero-cost CALL, RAISE amounts clip into bounds, and RAISE
/// without a raise available becomes CALL. Idempotent.
pub fn normalize_action(proposed: Action, legal: &LegalActionSet) -> Action {
    match proposed {
        Action::Check | Action::Fold if legal.call_amount == 0 => Action::Call,
        Action::Check => Action::Fold,
        Action::Fold => Action::Fold,
        Action::Call => Action::Call,
        Action::Raise { .. } if !legal.raise_available => Action::Call,
        Action::Raise { to } => Action::Raise {
            to: to.clamp(legal.min_raise, legal.max_raise),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seat {
    pub player_id: String,
    pub stack: u64,
    pub committed_street: u64,
    pub committed_hand: u64,
    pub folded: bool,
    pub all_in: bool,
    pub sitting_out: bool,
    pub hole: Option<[Card; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seat: usize,
    pub street: Street,
    pub action: Action,
    pub paid: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableState {
    pub street: Street,
    pub board: Vec<Card>,
    pub button: usize,
    pub seats: Vec<Seat>,
    pub current_bet: u64,
    pub min_raise_increment: u64,
    pub history: Vec<HistoryEntry>,
}

impl TableState {
    pub fn pot(&self) -> u64 {
        self.seats.iter().map(|s| s.committed_hand).sum()
    }

    pub fn live_seats(&self) -> Vec<usize> {
        (0..self.seats.len())
            .filter(|&i| {
                let s = &self.seats[i];
                !s.folded && !s.sitting_out && s.hole.is_some()
            })
            .collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("seat {got} acted out of turn (expected {expected:?})")]
    OutOfTurn { got: usize, expected: Option<usize> },
    #[error("hand is already over")]
    HandOver,
    #[error("need at least 2 seats with chips, got {0}")]
    TooFewPlayers(usize),
    #[error("action is not legal here even after normalization: {0}")]
    IllegalAction(&'static str),
}

/// Per-pot showdown result: the layered amount and its winners.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotAward {
    pub amount: u64,
    pub eligible: Vec<usize>,
    pub winners: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandOutcome {
    pub pots: Vec<PotAward>,
    pub showdown: bool,
    /// Net chip movement per seat across the hand (final minus starting stack).
    pub net: Vec<i64>,
}

/// Stack snapshot used to start a hand.
#[derive(Debug, Clone)]
pub struct PlayerInit {
    pub player_id: String,
    pub stack: u64,
}

/// One hand in progress: table state plus the undealt deck.
#[derive(Debug, Clone)]
pub struct Hand {
    pub table: TableState,
    deck: Vec<Card>,
    next_card: usize,
    big_blind: u64,
    start_stacks: Vec<u64>,
    to_act: Option<usize>,
    needs_action: Vec<bool>,
    outcome: Option<HandOutcome>,
}

impl Hand {
    /// Shuffles, deals hole cards to every seat with chips, and posts blinds.
    /// Heads-up the button posts the small blind and acts first preflop.
    pub fn new(
        players: &[PlayerInit],
        button: usize,
        blinds: (u64, u64),
        rng: &mut impl Rng,
    ) -> Result<Hand, EngineError> {
        let n = players.len();
        let funded: Vec<usize> = (0..n).filter(|&i| players[i].stack > 0).collect();
        if funded.len() < 2 {
            return Err(EngineError::TooFewPlayers(funded.len()));
        }

        let mut deck = full_deck();
        for i in 0..deck.len() {
            let j = rng.gen_range(i..deck.len());
            deck.swap(i, j);
        }

        let mut seats: Vec<Seat> = players
            .iter()
            .map(|p| Seat {
                player_id: p.player_id.clone(),
                stack: p.stack,
                committed_street: 0,
                committed_hand: 0,
                folded: false,
                all_in: false,
                sitting_out: p.stack == 0,
                hole: None,
            })
            .collect();

        let mut next_card = 0;
        for &i in &funded {
            seats[i].hole = Some([deck[next_card], deck[next_card + 1]]);
            next_card += 2;
        }

        let heads_up = funded.len() == 2;
        let (sb_seat, bb_seat) = if heads_up {
            (button, next_in(&funded, button, n))
        } else {
            let sb = next_in(&funded, button, n);
            (sb, next_in(&funded, sb, n))
        };

        let mut hand = Hand {
            table: TableState {
                street: Street::Preflop,
                board: Vec::new(),
                button,
                seats,
                current_bet: 0,
                min_raise_increment: blinds.1,
                history: Vec::new(),
            },
            deck,
            next_card,
            big_blind: blinds.1,
            start_stacks: players.iter().map(|p| p.stack).collect(),
            to_act: None,
            needs_action: vec![false; n],
            outcome: None,
        };

        hand.post_blind(sb_seat, blinds.0);
        hand.post_blind(bb_seat, blinds.1);
        hand.table.current_bet = hand
            .table
            .seats
            .iter()
            .map(|s| s.committed_street)
            .max()
            .unwrap_or(0);

        for &i in &funded {
            hand.needs_action[i] = !hand.table.seats[i].all_in;
        }
        let first = next_in(&funded, bb_seat, n);
        hand.to_act = hand.next_actor(first);
        if hand.to_act.is_none() {
            hand.close_street();
        }
        Ok(hand)
    }

    fn post_blind(&mut self, seat: usize, blind: u64) {
        let s = &mut self.table.seats[seat];
        let pay = blind.min(s.stack);
        s.stack -= pay;
        s.committed_street += pay;
        s.committed_hand += pay;
        if s.stack == 0 {
            s.all_in = true;
        }
    }

    pub fn is_over(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn outcome(&self) -> Option<&HandOutcome> {
        self.outcome.as_ref()
    }

    pub fn to_act(&self) -> Option<usize> {
        self.to_act
    }

    /// Legal envelope for the seat currently to act.
    pub fn legal_actions(&self) -> Option<LegalActionSet> {
        let seat = self.to_act?;
        let s = &self.table.seats[seat];
        let call_amount = (self.table.current_bet - s.committed_street).min(s.stack);
        let max_raise = s.committed_street + s.stack;
        let min_raise = (self.table.current_bet + self.table.min_raise_increment).min(max_raise);
        let raise_available = max_raise > self.table.current_bet;
        Some(LegalActionSet {
            can_fold: call_amount > 0,
            call_amount,
            min_raise,
            max_raise,
            raise_available,
        })
    }

    /// Applies an already-normalized action for `seat`.
    pub fn apply(&mut self, seat: usize, action: Action) -> Result<(), EngineError> {
        if self.outcome.is_some() {
            return Err(EngineError::HandOver);
        }
        if self.to_act != Some(seat) {
            return Err(EngineError::OutOfTurn {
                got: seat,
                expected: self.to_act,
            });
        }
        let legal = self.legal_actions().expect("actor exists");
        let street = self.table.street;
        let mut paid = 0u64;

        match action {
            Action::Fold => {
                self.table.seats[seat].folded = true;
            }
            Action::Check | Action::Call => {
                if matches!(action, Action::Check) && legal.call_amount > 0 {
                    return Err(EngineError::IllegalAction("CHECK facing a bet"));
                }
                paid = legal.call_amount;
                let s = &mut self.table.seats[seat];
                s.stack -= paid;
                s.committed_street += paid;
                s.committed_hand += paid;
                if s.stack == 0 {
                    s.all_in = true;
                }
            }
            Action::Raise { to } => {
                if !legal.raise_available {
                    return Err(EngineError::IllegalAction("RAISE not available"));
                }
                if to < legal.min_raise || to > legal.max_raise {
                    return Err(EngineError::IllegalAction("RAISE outside legal bounds"));
                }
                let s = &mut self.table.seats[seat];
                paid = to - s.committed_street;
                s.stack -= paid;
                s.committed_street = to;
                s.committed_hand += paid;
                if s.stack == 0 {
                    s.all_in = true;
                }
                if to > self.table.current_bet {
                    let increment = to - self.table.current_bet;
                    if increment >= self.table.min_raise_increment {
                        self.table.min_raise_increment = increment;
                    }
                    self.table.current_bet = to;
                    for i in 0..self.needs_action.len() {
                        let other = &self.table.seats[i];
                        self.needs_action[i] =
                            i != seat && !other.folded && !other.all_in && other.hole.is_some();
                    }
                }
            }
        }

        self.table.history.push(HistoryEntry {
            seat,
            street,
            action,
            paid,
        });
        self.needs_action[seat] = false;

        if self.table.live_seats().len() == 1 {
            self.finish(false);
            return Ok(());
        }

        self.to_act = self.next_actor((seat + 1) % self.table.seats.len());
        if self.to_act.is_none() {
            self.close_street();
        }
        Ok(())
    }

    fn next_actor(&self, start: usize) -> Option<usize> {
        let n = self.table.seats.len();
        let mut i = start;
        for _ in 0..n {
            if self.needs_action[i] {
                return Some(i);
            }
            i = (i + 1) % n;
        }
        None
    }

    /// Ends the betting round: advances the street (dealing the board) or
    /// resolves the hand at the river. With fewer than two seats able to
    /// bet, the remaining board runs out automatically.
    fn close_street(&mut self) {
        loop {
            for s in &mut self.table.seats {
                s.committed_street = 0;
            }
            self.table.current_bet = 0;
            self.table.min_raise_increment = self.big_blind;

            let Some(next) = self.table.street.next() else {
                self.finish(true);
                return;
            };
            self.table.street = next;
            while self.table.board.len() < next.board_size() {
                self.table.board.push(self.deck[self.next_card]);
                self.next_card += 1;
            }

            let can_bet: Vec<usize> = self
                .table
                .live_seats()
                .into_iter()
                .filter(|&i| !self.table.seats[i].all_in)
                .collect();
            if can_bet.len() >= 2 {
                for i in 0..self.needs_action.len() {
                    self.needs_action[i] = can_bet.contains(&i);
                }
                let first = (self.table.button + 1) % self.table.seats.len();
                self.to_act = self.next_actor(first);
                if self.to_act.is_some() {
                    return;
                }
            }
            self.to_act = None;
            self.needs_action.iter_mut().for_each(|b| *b = false);
        }
    }

    /// Awards layered pots. Uncalled excess returns to the over-committer
    /// first; odd chips go to the earliest eligible seat left of the button.
    fn finish(&mut self, at_showdown_point: bool) {
        let n = self.table.seats.len();
        let mut commitments: Vec<u64> =
            self.table.seats.iter().map(|s| s.committed_hand).collect();

        let mut sorted: Vec<u64> = commitments.iter().copied().filter(|&c| c > 0).collect();
        sorted.sort_unstable();
        if let Some(&top) = sorted.last() {
            let second = if sorted.len() >= 2 {
                sorted[sorted.len() - 2]
            } else {
                0
            };
            if top > second {
                let over = (0..n).find(|&i| commitments[i] == top).unwrap();
                let refund = top - second;
                commitments[over] -= refund;
                self.table.seats[over].stack += refund;
                self.table.seats[over].committed_hand -= refund;
            }
        }

        let live = self.table.live_seats();
        let showdown = at_showdown_point && live.len() >= 2;

        let ranks: Vec<Option<HandRank>> = (0..n)
            .map(|i| {
                if !showdown || !live.contains(&i) {
                    return None;
                }
                let hole = self.table.seats[i].hole?;
                let mut seven: Vec<Card> = hole.to_vec();
                seven.extend_from_slice(&self.table.board);
                Some(evaluate_hand(&seven).expect("valid deal"))
            })
            .collect();

        let mut levels: Vec<u64> = commitments.iter().copied().filter(|&c| c > 0).collect();
        levels.sort_unstable();
        levels.dedup();

        let mut pots = Vec::new();
        let mut prev = 0u64;
        for &level in &levels {
            let amount: u64 = commitments
                .iter()
                .map(|&c| c.min(level).saturating_sub(prev))
                .sum();
            let eligible: Vec<usize> = (0..n)
                .filter(|&i| live.contains(&i) && commitments[i] >= level)
                .collect();
            prev = level;
            if amount == 0 {
                continue;
            }
            debug_assert!(!eligible.is_empty(), "pot layer with no eligible seat");

            let winners: Vec<usize> = if eligible.len() == 1 || !showdown {
                vec![*eligible.first().expect("nonempty layer")]
            } else {
                let best = eligible
                    .iter()
                    .filter_map(|&i| ranks[i])
                    .max()
                    .expect("showdown ranks");
                eligible
                    .iter()
                    .copied()
                    .filter(|&i| ranks[i] == Some(best))
                    .collect()
            };

            let share = amount / winners.len() as u64;
            let mut remainder = amount - share * winners.len() as u64;
            let mut ordered = winners.clone();
            ordered.sort_by_key(|&i| (i + n - (self.table.button + 1) % n) % n);
            for &w in &ordered {
                let extra = if remainder > 0 {
                    remainder -= 1;
                    1
                } else {
                    0
                };
                self.table.seats[w].stack += share + extra;
            }
            pots.push(PotAward {
                amount,
                eligible,
                winners,
            });
        }

        for s in &mut self.table.seats {
            s.committed_hand = 0;
            s.committed_street = 0;
        }
        let net: Vec<i64> = (0..n)
            .map(|i| self.table.seats[i].stack as i64 - self.start_stacks[i] as i64)
            .collect();
        self.to_act = None;
        self.outcome = Some(HandOutcome {
            pots,
            showdown,
            net,
        });
    }
}

fn next_in(members: &[usize], after: usize, n: usize) -> usize {
    let mut i = after;
    loop {
        i = (i + 1) % n;
        if members.contains(&i) {
            return i;
        }
    }
}

/// Next seat with chips after `after`, for button rotation across hands.
pub fn next_funded_seat(stacks: &[u64], after: usize) -> Option<usize> {
    let n = stacks.len();
    let mut i = after;
    for _ in 0..n {
        i = (i + 1) % n;
        if stacks[i] > 0 {
            return Some(i);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn players(stacks: &[u64]) -> Vec<PlayerInit> {
        stacks
            .iter()
            .enumerate()
            .map(|(i, &s)| PlayerInit {
                player_id: format!("p{i}"),
                stack: s,
            })
            .collect()
    }

    fn total_chips(hand: &Hand) -> u64 {
        hand.table.seats.iter().map(|s| s.stack).sum::<u64>() + hand.table.pot()
    }

    #[test]
    fn normalize_rules() {
        let free = LegalActionSet {
            can_fold: false,
            call_amount: 0,
            min_raise: 20,
            max_raise: 500,
            raise_available: true,
        };
        let facing = LegalActionSet {
            can_fold: true,
            call_amount: 10,
            min_raise: 20,
            max_raise: 500,
            raise_available: true,
        };
        assert_eq!(normalize_action(Action::Check, &free), Action::Call);
        assert_eq!(normalize_action(Action::Check, &facing), Action::Fold);
        assert_eq!(
            normalize_action(Action::Raise { to: 9999 }, &facing),
            Action::Raise { to: 500 }
        );
        assert_eq!(
            normalize_action(Action::Raise { to: 1 }, &facing),
            Action::Raise { to: 20 }
        );
        let no_raise = LegalActionSet {
            raise_available: false,
            ..facing
        };
        assert_eq!(
            normalize_action(Action::Raise { to: 100 }, &no_raise),
            Action::Call
        );
        for proposed in [
            Action::Fold,
            Action::Check,
            Action::Call,
            Action::Raise { to: 7 },
            Action::Raise { to: 10_000 },
        ] {
            for legal in [free, facing, no_raise] {
                let once = normalize_action(proposed, &legal);
                assert_eq!(normalize_action(once, &legal), once);
            }
        }
    }

    #[test]
    fn folds_to_big_blind_award_pot_without_showdown() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ps = players(&[1000, 1000, 1000]);
        let mut hand = Hand::new(&ps, 0, (5, 10), &mut rng).unwrap();
        // Button 0, SB seat 1, BB seat 2; first to act is seat 0.
        assert_eq!(hand.to_act(), Some(0));
        hand.apply(0, Action::Fold).unwrap();
        hand.apply(1, Action::Fold).unwrap();
        let out = hand.outcome().unwrap();
        assert!(!out.showdown);
        assert_eq!(out.net, vec![0, -5, 5]);
        assert_eq!(hand.table.seats[2].stack, 1005);
        assert_eq!(total_chips(&hand), 3000);
    }

    #[test]
    fn heads_up_button_posts_small_blind_and_acts_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ps = players(&[1000, 1000]);
        let hand = Hand::new(&ps, 1, (5, 10), &mut rng).unwrap();
        assert_eq!(hand.table.seats[1].committed_hand, 5);
        assert_eq!(hand.table.seats[0].committed_hand, 10);
        assert_eq!(hand.to_act(), Some(1));
    }

    #[test]
    fn check_around_advances_street_only_after_everyone_acts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ps = players(&[1000, 1000, 1000]);
        let mut hand = Hand::new(&ps, 0, (5, 10), &mut rng).unwrap();
        hand.apply(0, Action::Call).unwrap();
        hand.apply(1, Action::Call).unwrap();
        hand.apply(2, Action::Call).unwrap();
        assert_eq!(hand.table.street, Street::Flop);
        assert_eq!(hand.table.board.len(), 3);
        // Postflop first actor is left of the button.
        assert_eq!(hand.to_act(), Some(1));
        hand.apply(1, Action::Call).unwrap();
        hand.apply(2, Action::Call).unwrap();
        assert_eq!(hand.table.street, Street::Flop);
        hand.apply(0, Action::Call).unwrap();
        assert_eq!(hand.table.street, Street::Turn);
        assert_eq!(hand.table.board.len(), 4);
    }

    #[test]
    fn big_blind_keeps_the_option_after_limps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ps = players(&[1000, 1000, 1000]);
        let mut hand = Hand::new(&ps, 0, (5, 10), &mut rng).unwrap();
        hand.apply(0, Action::Call).unwrap();
        hand.apply(1, Action::Call).unwrap();
        assert_eq!(hand.table.street, Street::Preflop);
        assert_eq!(hand.to_act(), Some(2));
        let legal = hand.legal_actions().unwrap();
        assert_eq!(legal.call_amount, 0);
        assert!(legal.raise_available);
        hand.apply(2, Action::Raise { to: 30 }).unwrap();
        // The raise reopens action for the limpers.
        assert_eq!(hand.to_act(), Some(0));
    }

    #[test]
    fn side_pots_layer_by_commitment() {
        // Stacks 50 / 120 / 200, everyone all-in preflop.
        // Main pot 150 (all), side pot 140 (seats 1 and 2), 80 returned to seat 2.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ps = players(&[50, 120, 200]);
        let mut hand = Hand::new(&ps, 0, (5, 10), &mut rng).unwrap();
        hand.apply(0, Action::Raise { to: 50 }).unwrap();
        hand.apply(1, Action::Raise { to: 120 }).unwrap();
        hand.apply(2, Action::Raise { to: 200 }).unwrap();
        let out = hand.outcome().unwrap().clone();
        assert!(out.showdown);
        assert_eq!(hand.table.board.len(), 5);
        assert_eq!(out.pots.len(), 2);
        assert_eq!(out.pots[0].amount, 150);
        assert_eq!(out.pots[0].eligible, vec![0, 1, 2]);
        assert_eq!(out.pots[1].amount, 140);
        assert_eq!(out.pots[1].eligible, vec![1, 2]);
        let total: u64 = hand.table.seats.iter().map(|s| s.stack).sum();
        assert_eq!(total, 370);
        assert_eq!(out.net.iter().sum::<i64>(), 0);
    }

    #[test]
    fn uncalled_excess_returns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ps = players(&[1000, 1000]);
        let mut hand = Hand::new(&ps, 0, (5, 10), &mut rng).unwrap();
        hand.apply(0, Action::Raise { to: 300 }).unwrap();
        hand.apply(1, Action::Fold).unwrap();
        // Seat 1 (BB) committed 10; seat 0 gets 290 back and wins the 20 pot.
        assert_eq!(hand.table.seats[0].stack, 1010);
        assert_eq!(hand.table.seats[1].stack, 990);
        assert_eq!(hand.outcome().unwrap().net, vec![10, -10]);
    }

    #[test]
    fn out_of_turn_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ps = players(&[1000, 1000, 1000]);
        let mut hand = Hand::new(&ps, 0, (5, 10), &mut rng).unwrap();
        let err = hand.apply(1, Action::Call).unwrap_err();
        assert!(matches!(err, EngineError::OutOfTurn { got: 1, .. }));
    }

    #[test]
    fn busted_seats_sit_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ps = players(&[1000, 0, 1000]);
        let hand = Hand::new(&ps, 2, (5, 10), &mut rng).unwrap();
        assert!(hand.table.seats[1].sitting_out);
        assert!(hand.table.seats[1].hole.is_none());
        // Heads-up between 0 and 2: button 2 posts SB.
        assert_eq!(hand.table.seats[2].committed_hand, 5);
        assert_eq!(hand.table.seats[0].committed_hand, 10);
    }

    #[test]
    fn chip_conservation_over_random_hands() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..200u64 {
            let stacks = [
                rng.gen_range(20..2000),
                rng.gen_range(20..2000),
                rng.gen_range(20..2000),
                rng.gen_range(20..2000),
            ];
            let expected: u64 = stacks.iter().sum();
            let ps = players(&stacks);
            let mut hand = Hand::new(&ps, (trial % 4) as usize, (5, 10), &mut rng).unwrap();
            let mut guard = 0;
            while let Some(seat) = hand.to_act() {
                let legal = hand.legal_actions().unwrap();
                let roll: f64 = rng.gen();
                let proposed = if roll < 0.2 {
                    Action::Fold
                } else if roll < 0.65 {
                    Action::Call
                } else {
                    Action::Raise {
                        to: rng.gen_range(legal.min_raise..=legal.max_raise.max(legal.min_raise)),
                    }
                };
                let action = normalize_action(proposed, &legal);
                hand.apply(seat, action).unwrap();
                assert_eq!(total_chips(&hand), expected, "trial {trial}");
                guard += 1;
                assert!(guard < 500, "betting round failed to terminate");
            }
            assert!(hand.is_over());
            let final_total: u64 = hand.table.seats.iter().map(|s| s.stack).sum();
            assert_eq!(final_total, expected, "trial {trial}");
            assert_eq!(
                hand.outcome().unwrap().net.iter().sum::<i64>(),
                0,
                "trial {trial}"
            );
        }
    }

    #[test]
    fn board_size_matches_street() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ps = players(&[500, 500]);
        let mut hand = Hand::new(&ps, 0, (5, 10), &mut rng).unwrap();
        assert_eq!(hand.table.board.len(), hand.table.street.board_size());
        while let Some(seat) = hand.to_act() {
            hand.apply(seat, Action::Call).unwrap();
            assert_eq!(hand.table.board.len(), hand.table.street.board_size());
        }
    }

    #[test]
    fn blind_all_in_runs_out_the_board() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ps = players(&[8, 1000]);
        let mut hand = Hand::new(&ps, 0, (5, 10), &mut rng).unwrap();
        // Button (seat 0) has 3 chips behind after posting SB 5.
        if let Some(seat) = hand.to_act() {
            let legal = hand.legal_actions().unwrap();
            hand.apply(seat, normalize_action(Action::Call, &legal))
                .unwrap();
            while let Some(seat) = hand.to_act() {
                let legal = hand.legal_actions().unwrap();
                hand.apply(seat, normalize_action(Action::Call, &legal))
                    .unwrap();
            }
        }
        assert!(hand.is_over());
        let total: u64 = hand.table.seats.iter().map(|s| s.stack).sum();
        assert_eq!(total, 1008);
    }
}
