/** Test support: recorded-fixture loading and a fetch stand-in that replays
 * those fixtures. Fixtures are real service responses captured by
 * tools/record_fixtures.py, stored as {"status": N, "body": ...}. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { FetchLike } from "../src/api.js";

const FIXTURE_DIR = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

export interface Recorded<T = unknown> {
  status: number;
  body: T;
}

export function loadFixture<T = unknown>(name: string): Recorded<T> {
  return JSON.parse(readFileSync(join(FIXTURE_DIR, `${name}.json`), "utf8")) as Recorded<T>;
}

/** Inputs saved without the status wrapper (request bodies, not replies). */
export function loadInput<T = unknown>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURE_DIR, `${name}.json`), "utf8")) as T;
}

export function asResponse(recorded: Recorded): Response {
  return new Response(JSON.stringify(recorded.body), {
    status: recorded.status,
    headers: { "content-type": "application/json" },
  });
}

export interface SeenRequest {
  method: string;
  path: string;
  body: unknown;
}

/** Replay fixtures keyed by "METHOD /path". Records every request so tests
 * can assert what actually went over the wire. Unrouted paths reject the
 * way an unreachable server would. */
export function fakeFetch(
  routes: Record<string, Recorded>,
  seen: SeenRequest[] = [],
): FetchLike {
  return async (url, init) => {
    const path = new URL(url).pathname;
    const method = init?.method ?? "GET";
    seen.push({
      method,
      path,
      body: typeof init?.body === "string" ? JSON.parse(init.body) : null,
    });
    const recorded = routes[`${method} ${path}`];
    if (recorded === undefined) {
      throw new TypeError("fetch failed");
    }
    return asResponse(recorded);
  };
}
