//! ISO-8601 week arithmetic.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

/// An ISO week-numbering (year, week) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IsoWeek {
    pub year: i32,
    pub week: u32,
}

impl IsoWeek {
    pub fn of(date: NaiveDate) -> Self {
        let w = date.iso_week();
        Self {
            year: w.year(),
            week: w.week(),
        }
    }

    pub fn monday(self) -> NaiveDate {
        NaiveDate::from_isoywd_opt(self.year, self.week, Weekday::Mon)
            .expect("IsoWeek always holds a valid ISO week")
    }

    pub fn friday(self) -> NaiveDate {
        self.monday() + Days::new(4)
    }

    /// Monday of the following week, the day the label refers to.
    pub fn next_monday(self) -> NaiveDate {
        self.monday() + Days::new(7)
    }

    pub fn next(self) -> Self {
        Self::of(self.next_monday())
    }
}

/// ISO-8601 week number, 1..=53.
pub fn week_of_year(date: NaiveDate) -> u32 {
    date.iso_week().week()
}
