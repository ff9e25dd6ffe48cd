//! Blackjack with an infinite deck.
//!
//! Rules: cards 2..9 and ace each come up with probability 1/13, ten-valued
//! cards with 4/13. An ace counts as 11 while that does not bust the hand.
//! A natural (ace plus ten on the first two cards) wins outright unless the
//! dealer also has one, which is a draw. Below 12 the player always hits;
//! from 12 to 21 the policy gene for the current state decides
//! (0 = stand, 1 = hit). The dealer hits until reaching 17, soft totals
//! included.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FitnessEstimate, FitnessFunction};
use crate::genome::{Genome, GenomeSpec};
use crate::rng;
use crate::{Error, Result};

pub const STATES: usize = 200;
pub const STAND: u8 = 0;
pub const HIT: u8 = 1;
pub const DEFAULT_GAMES: usize = 100_000;

pub fn genome_spec() -> GenomeSpec {
    GenomeSpec {
        length: STATES,
        alphabet_size: 2,
    }
}

/// A decision point of the player.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlackjackState {
    /// 12..=21
    pub player_sum: u8,
    /// 1..=10, 1 is an ace
    pub dealer_upcard: u8,
    pub usable_ace: bool,
}

impl BlackjackState {
    pub fn index(&self) -> usize {
        state_index(self.player_sum, self.dealer_upcard, self.usable_ace)
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < STATES);
        Self {
            player_sum: 12 + (index / 20) as u8,
            dealer_upcard: 1 + ((index / 2) % 10) as u8,
            usable_ace: index % 2 == 1,
        }
    }
}

#[inline]
pub fn state_index(player_sum: u8, dealer_upcard: u8, usable_ace: bool) -> usize {
    debug_assert!((12..=21).contains(&player_sum));
    debug_assert!((1..=10).contains(&dealer_upcard));
    ((player_sum as usize - 12) * 10 + (dealer_upcard as usize - 1)) * 2 + usable_ace as usize
}

#[derive(Debug, Clone, Copy, Default)]
struct Hand {
    /// Sum with every ace counted as 1.
    hard: u8,
    has_ace: bool,
}

impl Hand {
    fn of(a: u8, b: u8) -> Self {
        Self::default().with(a).with(b)
    }

    #[inline]
    fn with(self, card: u8) -> Self {
        Self {
            hard: self.hard + card,
            has_ace: self.has_ace || card == 1,
        }
    }

    #[inline]
    fn usable_ace(self) -> bool {
        self.has_ace && self.hard + 10 <= 21
    }

    #[inline]
    fn value(self) -> u8 {
        if self.usable_ace() {
            self.hard + 10
        } else {
            self.hard
        }
    }
}

fn is_natural(a: u8, b: u8) -> bool {
    (a == 1 && b == 10) || (a == 10 && b == 1)
}

#[inline]
fn draw<R: Rng + ?Sized>(rng: &mut R) -> u8 {
    rng.gen_range(1u8..=13).min(10)
}

/// Plays one hand and returns +1, 0 or -1 from the player's point of view.
pub fn play_hand<R: Rng + ?Sized>(policy: &[u8], rng: &mut R) -> i8 {
    let (p1, p2) = (draw(rng), draw(rng));
    let (upcard, hole) = (draw(rng), draw(rng));

    if is_natural(p1, p2) {
        return if is_natural(upcard, hole) { 0 } else { 1 };
    }

    let mut player = Hand::of(p1, p2);
    loop {
        let value = player.value();
        if value > 21 {
            return -1;
        }
        if value >= 12 && policy[state_index(value, upcard, player.usable_ace())] == STAND {
            break;
        }
        player = player.with(draw(rng));
    }

    let mut dealer = Hand::of(upcard, hole);
    while dealer.value() < 17 {
        dealer = dealer.with(draw(rng));
    }

    let (p, d) = (player.value(), dealer.value());
    if d > 21 || p > d {
        1
    } else if p == d {
        0
    } else {
        -1
    }
}

pub fn blackjack_fitness<R: Rng + ?Sized>(
    policy: &Genome,
    games: usize,
    rng: &mut R,
) -> Result<FitnessEstimate> {
    genome_spec().check(policy)?;
    if games == 0 {
        return Err(Error::invalid("games must be at least 1"));
    }
    let score: i64 = (0..games)
        .map(|_| i64::from(play_hand(&policy.genes, rng)))
        .sum();
    Ok(FitnessEstimate::from_score(score, games))
}

/// Exact outcome probabilities of a policy.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Outcome {
    pub win: f64,
    pub draw: f64,
    pub loss: f64,
}

impl Outcome {
    const WIN: Outcome = Outcome {
        win: 1.0,
        draw: 0.0,
        loss: 0.0,
    };
    const DRAW: Outcome = Outcome {
        win: 0.0,
        draw: 1.0,
        loss: 0.0,
    };
    const LOSS: Outcome = Outcome {
        win: 0.0,
        draw: 0.0,
        loss: 1.0,
    };

    pub fn value(&self) -> f64 {
        self.win - self.loss
    }

    fn add_scaled(&mut self, other: Outcome, p: f64) {
        self.win += p * other.win;
        self.draw += p * other.draw;
        self.loss += p * other.loss;
    }
}

fn card_prob(card: u8) -> f64 {
    if card == 10 {
        4.0 / 13.0
    } else {
        1.0 / 13.0
    }
}

/// Dealer final totals: index 0..=4 are 17..=21, index 5 is bust.
type DealerDist = [f64; 6];

fn dealer_from(hand: Hand, memo: &mut [[Option<DealerDist>; 2]; 32]) -> DealerDist {
    if let Some(d) = memo[hand.hard as usize][hand.has_ace as usize] {
        return d;
    }
    let mut dist = [0.0; 6];
    let value = hand.value();
    if value > 21 {
        dist[5] = 1.0;
    } else if value >= 17 {
        dist[(value - 17) as usize] = 1.0;
    } else {
        for card in 1..=10 {
            let next = dealer_from(hand.with(card), memo);
            for (d, n) in dist.iter_mut().zip(next) {
                *d += card_prob(card) * n;
            }
        }
    }
    memo[hand.hard as usize][hand.has_ace as usize] = Some(dist);
    dist
}

/// Distribution of the dealer's final total given the upcard, without
/// conditioning on the hole card.
fn dealer_distribution(upcard: u8) -> DealerDist {
    let mut memo = [[None; 2]; 32];
    let mut dist = [0.0; 6];
    for hole in 1..=10 {
        let d = dealer_from(Hand::of(upcard, hole), &mut memo);
        for (acc, x) in dist.iter_mut().zip(d) {
            *acc += card_prob(hole) * x;
        }
    }
    dist
}

fn stand_outcome(player: u8, dealer: &DealerDist) -> Outcome {
    let mut out = Outcome {
        win: dealer[5],
        ..Outcome::default()
    };
    for (i, &p) in dealer[..5].iter().enumerate() {
        let total = 17 + i as u8;
        match player.cmp(&total) {
            std::cmp::Ordering::Greater => out.win += p,
            std::cmp::Ordering::Equal => out.draw += p,
            std::cmp::Ordering::Less => out.loss += p,
        }
    }
    out
}

/// Exact outcome probabilities of `policy` by dynamic programming over
/// (player total, usable ace) for each dealer upcard.
pub fn blackjack_exact_outcome(policy: &Genome) -> Result<Outcome> {
    genome_spec().check(policy)?;
    let mut total = Outcome::default();

    for upcard in 1..=10u8 {
        let dealer = dealer_distribution(upcard);
        // hard[s - 12], soft[s - 12] for s in 12..=21
        let mut hard = [Outcome::default(); 10];
        let mut soft = [Outcome::default(); 10];

        for s in (12..=21u8).rev() {
            hard[(s - 12) as usize] = if policy.genes[state_index(s, upcard, false)] == STAND {
                stand_outcome(s, &dealer)
            } else {
                let mut acc = Outcome::default();
                for card in 1..=10 {
                    let next = if s + card > 21 {
                        Outcome::LOSS
                    } else {
                        hard[(s + card - 12) as usize]
                    };
                    acc.add_scaled(next, card_prob(card));
                }
                acc
            };
        }
        for s in (12..=21u8).rev() {
            soft[(s - 12) as usize] = if policy.genes[state_index(s, upcard, true)] == STAND {
                stand_outcome(s, &dealer)
            } else {
                let mut acc = Outcome::default();
                for card in 1..=10 {
                    let next = if s + card <= 21 {
                        soft[(s + card - 12) as usize]
                    } else {
                        hard[(s + card - 10 - 12) as usize]
                    };
                    acc.add_scaled(next, card_prob(card));
                }
                acc
            };
        }

        // Forced hits below 12, memoized on (hard sum, has_ace).
        fn opening(
            hand: Hand,
            hard: &[Outcome; 10],
            soft: &[Outcome; 10],
            memo: &mut [[Option<Outcome>; 2]; 22],
        ) -> Outcome {
            let value = hand.value();
            if value >= 12 {
                return if hand.usable_ace() {
                    soft[(value - 12) as usize]
                } else {
                    hard[(value - 12) as usize]
                };
            }
            if let Some(o) = memo[hand.hard as usize][hand.has_ace as usize] {
                return o;
            }
            let mut acc = Outcome::default();
            for card in 1..=10 {
                acc.add_scaled(opening(hand.with(card), hard, soft, memo), card_prob(card));
            }
            memo[hand.hard as usize][hand.has_ace as usize] = Some(acc);
            acc
        }

        let dealer_natural = match upcard {
            1 => card_prob(10),
            10 => card_prob(1),
            _ => 0.0,
        };
        let mut memo = [[None; 2]; 22];
        let mut given_upcard = Outcome::default();
        for c1 in 1..=10u8 {
            for c2 in 1..=10u8 {
                let p = card_prob(c1) * card_prob(c2);
                if is_natural(c1, c2) {
                    given_upcard.add_scaled(Outcome::DRAW, p * dealer_natural);
                    given_upcard.add_scaled(Outcome::WIN, p * (1.0 - dealer_natural));
                } else {
                    let o = opening(Hand::of(c1, c2), &hard, &soft, &mut memo);
                    given_upcard.add_scaled(o, p);
                }
            }
        }
        total.add_scaled(given_upcard, card_prob(upcard));
    }
    Ok(total)
}

/// Exact expected `P(win) - P(loss)` of a policy.
pub fn blackjack_exact_value(policy: &Genome) -> Result<f64> {
    blackjack_exact_outcome(policy).map(|o| o.value())
}

/// Blackjack as a fitness function: `(wins - losses) / games`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blackjack {
    pub games: usize,
}

impl Default for Blackjack {
    fn default() -> Self {
        Self {
            games: DEFAULT_GAMES,
        }
    }
}

impl FitnessFunction for Blackjack {
    fn spec(&self) -> GenomeSpec {
        genome_spec()
    }

    fn evaluate(&self, genome: &Genome, rng: &mut rng::Rng) -> Result<f64> {
        blackjack_fitness(genome, self.games, rng).map(|f| f.normalized)
    }

    fn fitness_range(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }
}
