import argparse
import asyncio
import json
import logging
import sys
from typing import List, Optional

import numpy as np
import pandas as pd

from feedback_capacity.arma11_oracle import arma11_capacity
from feedback_capacity.config import Settings
from feedback_capacity.errors import (
    CertificationError,
    FeedcapError,
    InvalidInputError,
    OracleAmbiguityError,
)
from feedback_capacity.finite_horizon import HorizonOptions, optimize_horizon_async
from feedback_capacity.kalman_entropy import (
    entropy_finite,
    entropy_rate_spectral,
    riccati_stationary,
)
from feedback_capacity.methods import METHODS, PolyMethod, SdpMethod
from feedback_capacity.model import (
    Arma11Params,
    NoiseModel,
    arma11_to_statespace,
    is_stable,
    load_model,
    statespace_to_arma11,
)
from feedback_capacity.serialization import dump_json, write_csv
from feedback_capacity.simulate import simulate_stationary
from feedback_capacity.spectral import (
    fir_from_dict,
    fir_to_dict,
    optimize_fir,
    rate_and_power,
    waterfill_capacity,
)
from feedback_capacity.stationary_sdp import certificate_to_dict, solve_capacity

logger = logging.getLogger("Feedcap")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNCERTIFIED = 2
EXIT_AMBIGUOUS = 3


class FeedcapArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; 2 is reserved for uncertified results here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def configure_logging(settings: Settings) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.log_file:
        handlers.append(logging.FileHandler(settings.log_file))
    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


class FeedcapApp:
    def __init__(self, settings: Settings):
        self.settings = settings

    def emit_json(self, payload: dict) -> None:
        print(dump_json(payload))

    async def handle_capacity(self, args) -> int:
        model = load_model(args.model)
        cert = await asyncio.to_thread(solve_capacity, model, self.settings)
        self.emit_json(certificate_to_dict(cert))
        return EXIT_OK if cert.certified else EXIT_UNCERTIFIED

    async def handle_arma11(self, args) -> int:
        params = Arma11Params.from_values(args.alpha, args.beta, args.power)
        result = arma11_capacity(params)
        self.emit_json(
            {
                "alpha": params.alpha,
                "beta": params.beta,
                "P": params.P,
                "C_bits": result.C_bits,
                "r": result.r,
                "roots": result.roots,
                "coefficients": result.coefficients,
                "residual": result.residual,
            }
        )
        return EXIT_OK

    def _sweep_model(self, model: NoiseModel, param: str, value: float) -> NoiseModel:
        if param == "P":
            return model.with_power(value)
        arma = statespace_to_arma11(model)
        if arma is None:
            raise InvalidInputError(
                f"--param {param} needs a first-order ARMA model (m=1, G=1)", "param"
            )
        if param == "alpha":
            return arma11_to_statespace(Arma11Params.from_values(value, arma.beta, arma.P))
        return arma11_to_statespace(Arma11Params.from_values(arma.alpha, value, arma.P))

    async def handle_sweep(self, args) -> int:
        if args.points < 1:
            raise InvalidInputError("--points must be >= 1", "points")
        model = load_model(args.model)
        values = np.linspace(args.start, args.stop, args.points)
        models = [self._sweep_model(model, args.param, v) for v in values]

        extra = [name.strip() for name in args.methods.split(",") if name.strip()]
        unknown = [name for name in extra if name not in METHODS or name in ("sdp", "poly")]
        if unknown:
            raise InvalidInputError(f"Unknown sweep methods: {', '.join(unknown)}", "methods")
        methods = [SdpMethod(self.settings)]
        with_poly = PolyMethod(self.settings).applies_to(models[0])
        if with_poly:
            methods.append(PolyMethod(self.settings))
        methods += [METHODS[name](self.settings) for name in extra]

        semaphore = asyncio.Semaphore(self.settings.workers)

        async def run_point(point_model):
            return await asyncio.gather(
                *(method.compute_async(point_model, semaphore) for method in methods)
            )

        logger.info(f"Sweeping {args.param} over {args.points} points with {len(methods)} methods")
        results = await asyncio.gather(*(run_point(m) for m in models))

        rows = []
        for value, outputs in zip(values, results):
            row = {"param": value}
            for method, output in zip(methods, outputs):
                row[method.column] = np.nan if output is None else output
            if with_poly:
                row["gap"] = abs(row["C_sdp_bits"] - row["C_poly_bits"])
            rows.append(row)

        columns = ["param", "C_sdp_bits"]
        if with_poly:
            columns += ["C_poly_bits", "gap"]
        columns += [METHODS[name](self.settings).column for name in extra]
        frame = pd.DataFrame(rows, columns=columns)
        write_csv(frame, sys.stdout)

        failed = int(frame["C_sdp_bits"].isna().sum())
        if failed:
            logger.error(f"{failed}/{len(frame)} sweep points have no SDP value")
            return EXIT_ERROR
        return EXIT_OK

    async def handle_horizon(self, args) -> int:
        model = load_model(args.model)
        opts = HorizonOptions(
            restarts=args.restarts or self.settings.restarts,
            power_constraint=args.power_constraint,
            seed=args.seed,
            workers=self.settings.workers,
            settings=self.settings,
        )
        traj = await optimize_horizon_async(model, args.n, opts)
        self.emit_json(
            {
                "n": traj.n,
                "C_n": traj.C_n,
                "avg_power": traj.avg_power,
                "power_constraint": opts.power_constraint,
                "stationarity": traj.stationarity,
                "X_seq": traj.X_seq,
                "V_seq": traj.V_seq,
                "Y_seq": traj.Y_seq,
            }
        )
        if args.out:
            write_csv(traj.to_frame(), args.out)
        if args.trace:
            write_csv(traj.convergence_frame(), args.trace)
        return EXIT_OK

    async def handle_spectral(self, args) -> int:
        model = load_model(args.model)
        quad = self.settings.quad_points
        if args.strategy:
            with open(args.strategy, encoding="utf-8") as fh:
                try:
                    strategy = fir_from_dict(json.load(fh))
                except json.JSONDecodeError as e:
                    raise InvalidInputError(f"Strategy file is not valid JSON: {e}") from e
        else:
            strategy = await asyncio.to_thread(
                optimize_fir, model, args.taps, quad, restarts=args.restarts
            )
        rate, power = rate_and_power(model, strategy, quad)
        self.emit_json(
            {
                "taps": strategy.L,
                "quad_points": quad,
                "strategy": fir_to_dict(strategy),
                "rate_bits": rate,
                "power": power,
                "C_nofb_bits": waterfill_capacity(model, quad_points=quad),
            }
        )
        return EXIT_OK

    async def handle_simulate(self, args) -> int:
        model = load_model(args.model)
        cert = await asyncio.to_thread(solve_capacity, model, self.settings)
        if not cert.certified:
            logger.error("Refusing to simulate an uncertified strategy")
            self.emit_json({"certificate": certificate_to_dict(cert)})
            return EXIT_UNCERTIFIED
        report = await asyncio.to_thread(
            simulate_stationary, model, cert, args.steps, args.seed, bool(args.out)
        )
        self.emit_json(
            {
                "steps": report.steps,
                "seed": report.seed,
                "generator": report.generator,
                "Y_hat": report.Y_hat,
                "se_Y": report.se_Y,
                "Y_predicted": cert.Y,
                "power_hat": report.power_hat,
                "se_power": report.se_power,
                "power_predicted": cert.power_used,
                "lag1_autocorr": report.lag1_autocorr,
                "state_cov": report.state_cov,
            }
        )
        if args.out:
            write_csv(report.trace, args.out)
        return EXIT_OK

    async def handle_entropy(self, args) -> int:
        model = load_model(args.model)
        solution = riccati_stationary(model, trace=bool(args.trace))
        payload = {
            "S": solution.S,
            "innov_var": solution.innov_var,
            "K_gain": solution.K_gain,
            "iterations": solution.iterations,
            "residual": solution.residual,
        }
        if is_stable(model.F):
            rate = entropy_rate_spectral(model, self.settings.quad_points)
            payload.update(
                h_bits=rate.h_bits, szego_nats=rate.szego_nats, minimum_phase=rate.minimum_phase
            )
        else:
            logger.warning("F is not stable; skipping the spectral entropy rate")
        if args.n:
            payload[f"h_{args.n}_bits"] = entropy_finite(model, args.n)
        self.emit_json(payload)
        if args.trace:
            write_csv(solution.trace, args.trace)
        return EXIT_OK

    async def run(self, args) -> int:
        handler = getattr(self, f"handle_{args.command}")
        try:
            return await handler(args)
        except OracleAmbiguityError as e:
            logger.error(f"Closed-form oracle is ambiguous: {str(e)}")
            self.emit_json({"error": str(e), "roots": e.roots})
            return EXIT_AMBIGUOUS
        except CertificationError as e:
            logger.error(f"Certification failed: {str(e)}")
            return EXIT_UNCERTIFIED
        except InvalidInputError as e:
            where = f" [{e.field}]" if e.field else ""
            logger.error(f"Invalid input{where}: {str(e)}")
            return EXIT_ERROR
        except FeedcapError as e:
            logger.error(f"{args.command} failed: {str(e)}")
            return EXIT_ERROR
        except OSError as e:
            logger.error(f"I/O error: {str(e)}")
            return EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = FeedcapArgumentParser(
        prog="feedcap", description="Feedback capacity of Gaussian channels with state-space noise"
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=FeedcapArgumentParser)

    p = sub.add_parser("capacity", help="Solve the capacity SDP and print the certificate")
    p.add_argument("model")

    p = sub.add_parser("arma11", help="Closed-form capacity for ARMA(1,1) noise")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--power", type=float, required=True)

    p = sub.add_parser("sweep", help="Capacity over a parameter range, CSV on stdout")
    p.add_argument("model")
    p.add_argument("--param", choices=["P", "alpha", "beta"], default="P")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--methods", default="", help="extra columns: fir, nofb")

    p = sub.add_parser("horizon", help="Finite-horizon capacity C_n")
    p.add_argument("model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--power-constraint", choices=["per_step", "average"], default="per_step")
    p.add_argument("--out", help="trajectory CSV (k, Y_k, power_k, log2Y_k)")
    p.add_argument("--trace", help="per-restart convergence CSV")

    p = sub.add_parser("spectral", help="FIR feedback strategy rate")
    p.add_argument("model")
    p.add_argument("--taps", type=int, default=16)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--strategy", help="evaluate this FIR strategy JSON instead of optimizing")

    p = sub.add_parser("simulate", help="Monte-Carlo check of the stationary strategy")
    p.add_argument("model")
    p.add_argument("--steps", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="trace CSV (k, x_k, y_k)")

    p = sub.add_parser("entropy", help="Noise entropy rate and Riccati solution")
    p.add_argument("model")
    p.add_argument("--n", type=int, default=None, help="also report h(z^n)")
    p.add_argument("--trace", help="Riccati iterate CSV")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = Settings.from_env()
    except InvalidInputError as e:
        logging.basicConfig(level=logging.ERROR)
        logger.error(f"Invalid configuration [{e.field}]: {str(e)}")
        return EXIT_ERROR
    configure_logging(settings)
    app = FeedcapApp(settings)
    return asyncio.run(app.run(args))


if __name__ == "__main__":
    sys.exit(main())
