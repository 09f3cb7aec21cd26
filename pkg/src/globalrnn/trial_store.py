__all__ = ["TrialStore"]

import json
import logging
import math
import os

from typing import List, Optional, Union

import aiosqlite

from globalrnn.types import TrialRecord


logger = logging.getLogger(__name__)


class TrialStore:
    db: aiosqlite.Connection
    cur: aiosqlite.Cursor

    def __init__(self, db_name: Union[str, os.PathLike], clean: bool = False) -> None:
        """Create / Load the tuning trial log

        Parameters:
        ----------
            db_name (`Union[str, os.PathLike]`): SQLite file name.

            clean (`bool`, optional): Delete old trials and start fresh. (Defaults to `False`)

        """
        if clean and os.path.isfile(db_name):
            os.remove(db_name)
        self.db_name = db_name

    async def _init(self) -> None:
        """Async init"""
        try:
            self.con = await aiosqlite.connect(self.db_name)
            self.cur = await self.con.cursor()
            await self.__init_tables()
        except aiosqlite.DatabaseError:
            # DB is corrupt
            logger.warning("Trial store '%s' is unreadable, starting a new one", self.db_name)
            await self.con.close()
            if os.path.isfile(self.db_name):
                os.remove(self.db_name)
            self.con = await aiosqlite.connect(self.db_name)
            self.cur = await self.con.cursor()
            await self.__init_tables()

    async def __init_tables(self) -> None:
        """Create required Tables"""
        await self.cur.execute(
            """
CREATE TABLE IF NOT EXISTS trials (
    study TEXT NOT NULL,
    trial INTEGER NOT NULL,
    params TEXT NOT NULL,
    validation_smape REAL,
    seconds REAL,
    PRIMARY KEY(study, trial)
);"""
        )
        await self.con.commit()

    async def save_trials(self, study: str, trials: List[TrialRecord]) -> None:
        """Store the trials of one study, replacing earlier rows with the same index

        Parameters:
        ----------
            study (`str`): Study key, e.g. dataset + architecture + seed.

            trials (`List[TrialRecord]`): Finished trials.

        """
        await self.cur.executemany(
            "INSERT OR REPLACE INTO trials(study, trial, params, validation_smape, seconds) "
            "VALUES(?, ?, ?, ?, ?)",
            [
                (
                    study,
                    t.index,
                    json.dumps(t.params, sort_keys=True),
                    None if t.failed else t.validation_smape,
                    t.seconds,
                )
                for t in trials
            ],
        )
        await self.con.commit()

    async def get_trials(self, study: str) -> List[TrialRecord]:
        """Trials of one study in trial order, failed ones with a NaN score"""
        await self.cur.execute(
            "SELECT trial, params, validation_smape, seconds FROM trials "
            "WHERE study = ? ORDER BY trial",
            (study,),
        )
        return [
            TrialRecord(
                index=trial,
                params=json.loads(params),
                validation_smape=math.nan if score is None else score,
                seconds=seconds or 0.0,
            )
            for trial, params, score, seconds in await self.cur.fetchall()
        ]

    async def best_trial(self, study: str) -> Optional[TrialRecord]:
        trials = [t for t in await self.get_trials(study) if not t.failed]
        if trials:
            return min(trials, key=lambda t: (t.validation_smape, t.index))

    async def close(self) -> None:
        """Close Trial Store"""
        await self.con.close()
