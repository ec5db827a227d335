//! Hand equity estimation: Monte Carlo sampling with exact enumeration on
//! heads-up river states.
//!
//! Ties pay fractional credit 1/k for a k-way chop, matching pot-splitting
//! semantics. Simulation counts shrink as the board completes: preflop and
//! flop use the configured count, the turn uses half, and the river is
//! enumerated exactly against a single opponent (half count otherwise).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cards::{deck_without, evaluate_hand, Card, HandEvalError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EquityError {
    #[error("board must hold 0, 3, 4, or 5 cards, got {0}")]
    BadBoardSize(usize),
    #[error("need at least one opponent")]
    NoOpponents,
    #[error("need at least one simulation")]
    NoSimulations,
    #[error("deal is impossible: {needed} cards needed, {available} left in deck")]
    ImpossibleDeal { needed: usize, available: usize },
    #[error(transparent)]
    Cards(#[from] HandEvalError),
}

/// An equity figure plus the provenance needed to reason about its error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquityEstimate {
    pub equity: f64,
    pub simulations: u32,
    pub exact: bool,
}

/// Monte Carlo equity of `hole` against `n_opponents` random holdings.
pub fn estimate_equity(
    hole: [Card; 2],
    board: &[Card],
    n_opponents: usize,
    n_sims: u32,
    rng: &mut impl Rng,
) -> Result<EquityEstimate, EquityError> {
    validate(board, n_opponents)?;
    if n_sims == 0 {
        return Err(EquityError::NoSimulations);
    }
    let mut used = vec![hole[0], hole[1]];
    used.extend_from_slice(board);
    check_distinct(&used)?;
    let base_deck = deck_without(&used);
    let need = 2 * n_opponents + (5 - board.len());
    if need > base_deck.len() {
        return Err(EquityError::ImpossibleDeal {
            needed: need,
            available: base_deck.len(),
        });
    }

    let mut deck = base_deck;
    let mut credit = 0.0;
    for _ in 0..n_sims {
        for i in 0..need {
            let j = rng.gen_range(i..deck.len());
            deck.swap(i, j);
        }
        let drawn = &deck[..need];
        let board_full: Vec<Card> = board
            .iter()
            .copied()
            .chain(drawn[2 * n_opponents..].iter().copied())
            .collect();

        let mut seven = [hole[0]; 7];
        seven[..2].copy_from_slice(&hole);
        seven[2..].copy_from_slice(&board_full);
        let hero = evaluate_hand(&seven)?;

        let mut best_opp = None;
        let mut tied_with_best = 0usize;
        for o in 0..n_opponents {
            seven[..2].copy_from_slice(&drawn[2 * o..2 * o + 2]);
            let r = evaluate_hand(&seven)?;
            match best_opp {
                None => {
                    best_opp = Some(r);
                    tied_with_best = 1;
                }
                Some(b) if r > b => {
                    best_opp = Some(r);
                    tied_with_best = 1;
                }
                Some(b) if r == b => tied_with_best += 1,
                _ => {}
            }
        }
        let best_opp = best_opp.expect("n_opponents >= 1");
        if hero > best_opp {
            credit += 1.0;
        } else if hero == best_opp {
            credit += 1.0 / (1.0 + tied_with_best as f64);
        }
    }
    Ok(EquityEstimate {
        equity: credit / n_sims as f64,
        simulations: n_sims,
        exact: false,
    })
}

/// Exact heads-up river equity by enumerating every opponent holding.
pub fn enumerate_equity_river_heads_up(
    hole: [Card; 2],
    board: &[Card],
) -> Result<EquityEstimate, EquityError> {
    if board.len() != 5 {
        return Err(EquityError::BadBoardSize(board.len()));
    }
    let mut used = vec![hole[0], hole[1]];
    used.extend_from_slice(board);
    check_distinct(&used)?;
    let deck = deck_without(&used);

    let mut seven = [hole[0]; 7];
    seven[..2].copy_from_slice(&hole);
    seven[2..].copy_from_slice(board);
    let hero = evaluate_hand(&seven)?;

    let mut credit = 0.0;
    let mut combos = 0u32;
    for i in 0..deck.len() {
        for j in (i + 1)..deck.len() {
            seven[0] = deck[i];
            seven[1] = deck[j];
            let opp = evaluate_hand(&seven)?;
            if hero > opp {
                credit += 1.0;
            } else if hero == opp {
                credit += 0.5;
            }
            combos += 1;
        }
    }
    Ok(EquityEstimate {
        equity: credit / combos as f64,
        simulations: combos,
        exact: true,
    })
}

/// Street-adjusted equity: full count preflop and on the flop, half on the
/// turn, exact river enumeration heads-up (half count multiway).
pub fn equity_for_street(
    hole: [Card; 2],
    board: &[Card],
    n_opponents: usize,
    n_sims: u32,
    rng: &mut impl Rng,
) -> Result<EquityEstimate, EquityError> {
    validate(board, n_opponents)?;
    match board.len() {
        0 | 3 => estimate_equity(hole, board, n_opponents, n_sims, rng),
        4 => estimate_equity(hole, board, n_opponents, (n_sims / 2).max(1), rng),
        5 if n_opponents == 1 => enumerate_equity_river_heads_up(hole, board),
        5 => estimate_equity(hole, board, n_opponents, (n_sims / 2).max(1), rng),
        _ => unreachable!("validated board size"),
    }
}

fn validate(board: &[Card], n_opponents: usize) -> Result<(), EquityError> {
    if !matches!(board.len(), 0 | 3 | 4 | 5) {
        return Err(EquityError::BadBoardSize(board.len()));
    }
    if n_opponents == 0 {
        return Err(EquityError::NoOpponents);
    }
    Ok(())
}

fn check_distinct(cards: &[Card]) -> Result<(), EquityError> {
    let mut seen = [false; 52];
    for &c in cards {
        if seen[c.index()] {
            return Err(HandEvalError::DuplicateCard(c).into());
        }
        seen[c.index()] = true;
    }
    Ok(())
}
