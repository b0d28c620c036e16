// Shared fakes: an intercepting fetch and a Map-backed storage.

import type { FetchLike } from "../src/api.js";
import type { KeyValueStorage } from "../src/profile.js";

export interface Intercepted {
  url: string;
  init?: RequestInit;
  body?: unknown;
}

/** A fetch fake that records every request and replays scripted responses. */
export function interceptingFetch(
  handler: (url: string, init?: RequestInit) => Response | Promise<Response>,
): { fetchFn: FetchLike; requests: Intercepted[] } {
  const requests: Intercepted[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const entry: Intercepted = { url, init };
    if (typeof init?.body === "string") {
      entry.body = JSON.parse(init.body);
    }
    requests.push(entry);
    return handler(url, init);
  };
  return { fetchFn, requests };
}

export function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export class FakeStorage implements KeyValueStorage {
  constructor(private readonly backing: Map<string, string> = new Map()) {}

  getItem(key: string): string | null {
    return this.backing.has(key) ? (this.backing.get(key) as string) : null;
  }

  setItem(key: string, value: string): void {
    this.backing.set(key, value);
  }

  /** The persistent medium, shared across simulated page loads. */
  get medium(): Map<string, string> {
    return this.backing;
  }
}
