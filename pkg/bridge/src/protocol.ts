/**
 * Wire protocol shared with the engine's remote-scorer client.
 *
 * One JSON document per line, UTF-8, no framing beyond newlines. The
 * server's first output line advertises the protocol version; after that
 * every request line gets exactly one response line, in arrival order.
 */

export const PROTOCOL_VERSION = 'hdc-scorer/1';

export interface ScoreRequestMsg {
  id: number;
  image_id: string;
  prompt: string;
  t: number;
  noise_id: number;
  payload_b64?: string;
}

export type ScoreResponseMsg =
  | { id: number; error: number }
  | { id: number; fault: string };

/** Server-side recoverable failure: reported as a fault response. */
export class ScoringFault extends Error {}

export function handshakeLine(): string {
  return JSON.stringify({ protocol: PROTOCOL_VERSION });
}

export function parseRequest(line: string): ScoreRequestMsg {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch {
    throw new ScoringFault('malformed JSON line');
  }
  if (typeof doc !== 'object' || doc === null || Array.isArray(doc)) {
    throw new ScoringFault('request must be a JSON object');
  }
  const req = doc as Record<string, unknown>;
  if (typeof req.id !== 'number' || !Number.isInteger(req.id)) {
    throw new ScoringFault('missing or non-integer id');
  }
  if (typeof req.image_id !== 'string' || req.image_id.length === 0) {
    throw new ScoringFault('missing image_id');
  }
  if (typeof req.prompt !== 'string') {
    throw new ScoringFault('missing prompt');
  }
  if (typeof req.t !== 'number' || !Number.isInteger(req.t) || req.t < 1) {
    throw new ScoringFault('missing or invalid timestep t');
  }
  if (typeof req.noise_id !== 'number' || !Number.isFinite(req.noise_id)) {
    throw new ScoringFault('missing noise_id');
  }
  if (req.payload_b64 !== undefined && typeof req.payload_b64 !== 'string') {
    throw new ScoringFault('payload_b64 must be a string');
  }
  return {
    id: req.id,
    image_id: req.image_id,
    prompt: req.prompt,
    t: req.t,
    noise_id: req.noise_id,
    payload_b64: req.payload_b64 as string | undefined,
  };
}

export function serializeResponse(response: ScoreResponseMsg): string {
  return JSON.stringify(response);
}
