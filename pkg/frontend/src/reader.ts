/**
 * Reader controls attached to a converted article page.
 *
 * The page itself is complete without this script; everything here is
 * additive chrome: a working Report Issue dialog (with the current text
 * selection captured as a snippet), a theme switch, and a font-size
 * switch. Article content nodes are never mutated — only wrapper
 * attributes and chrome elements of our own making.
 */

export const SNIPPET_LIMIT = 500;

export type Theme = "auto" | "light" | "dark";
export const FONT_SCALES = [85, 100, 115, 130] as const;
export type FontScale = (typeof FONT_SCALES)[number];

const THEME_KEY = "texhtml.theme";
const FONT_KEY = "texhtml.fontScale";

export interface ReaderOptions {
  /** Base URL of the report service, e.g. "" for same-origin. */
  serverUrl?: string;
  doc?: Document;
  storage?: Storage;
}

interface ReportRequest {
  paperId: string;
  snippet?: string;
  description: string;
}

interface ReportResponse {
  reportId: string;
  duplicateOf?: string;
}

interface ReportSummary {
  reportId: string;
  snippet?: string;
  description: string;
  createdAt: string;
}

/** Paper identifier the emitter stamped on the page root. */
export function paperId(doc: Document = document): string {
  return doc.documentElement.getAttribute("data-paper-id") ?? "";
}

/**
 * Current text selection, truncated to SNIPPET_LIMIT characters.
 * Undefined when nothing is selected.
 */
export function captureSnippet(doc: Document = document): string | undefined {
  const selection = doc.defaultView?.getSelection?.();
  const text = selection?.toString() ?? "";
  if (text === "") {
    return undefined;
  }
  return text.slice(0, SNIPPET_LIMIT);
}

// --------------------------------------------------------------- theme

/** True when the OS currently prefers a dark palette. */
export function osPrefersDark(win: Window = window): boolean {
  return !!win.matchMedia && win.matchMedia("(prefers-color-scheme: dark)").matches;
}

/**
 * Apply a theme choice. "auto" removes the override so the stylesheet's
 * own color-scheme media rule tracks the OS preference.
 */
export function setTheme(
  theme: Theme,
  doc: Document = document,
  storage: Storage = localStorage,
): void {
  if (theme === "auto") {
    doc.documentElement.removeAttribute("data-theme");
  } else {
    doc.documentElement.setAttribute("data-theme", theme);
  }
  storage.setItem(THEME_KEY, theme);
}

export function storedTheme(storage: Storage = localStorage): Theme {
  const value = storage.getItem(THEME_KEY);
  return value === "light" || value === "dark" ? value : "auto";
}

/**
 * Palette actually in effect: the explicit choice, or the OS preference
 * when the choice is "auto".
 */
export function effectiveTheme(
  storage: Storage = localStorage,
  win: Window = window,
): "light" | "dark" {
  const choice = storedTheme(storage);
  if (choice === "auto") {
    return osPrefersDark(win) ? "dark" : "light";
  }
  return choice;
}

// ---------------------------------------------------------- font scale

export function setFontScale(
  scale: FontScale,
  doc: Document = document,
  storage: Storage = localStorage,
): void {
  const body = doc.querySelector("main");
  if (body instanceof doc.defaultView!.HTMLElement) {
    body.style.fontSize = scale === 100 ? "" : `${scale}%`;
  }
  storage.setItem(FONT_KEY, String(scale));
}

export function storedFontScale(storage: Storage = localStorage): FontScale {
  const value = Number(storage.getItem(FONT_KEY));
  return (FONT_SCALES as readonly number[]).includes(value)
    ? (value as FontScale)
    : 100;
}

// -------------------------------------------------------------- reports

export interface SubmitOutcome {
  kind: "submitted" | "duplicate" | "clipboard-fallback";
  reportId?: string;
  duplicateOf?: string;
}

/** Prior reports for this paper, newest first; empty on any failure. */
export async function fetchPriorReports(
  serverUrl: string,
  id: string,
): Promise<ReportSummary[]> {
  try {
    const resp = await fetch(`${serverUrl}/reports/${id}`);
    if (!resp.ok) {
      return [];
    }
    return (await resp.json()) as ReportSummary[];
  } catch {
    return [];
  }
}

/**
 * Submit a report; on network failure, fall back to copying the typed
 * text to the clipboard so nothing the reader wrote is lost.
 */
export async function submitReport(
  serverUrl: string,
  request: ReportRequest,
  clipboard: { writeText(text: string): Promise<void> } = navigator.clipboard,
): Promise<SubmitOutcome> {
  try {
    const resp = await fetch(`${serverUrl}/reports`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    if (!resp.ok) {
      throw new Error(`unexpected status ${resp.status}`);
    }
    const body = (await resp.json()) as ReportResponse;
    if (body.duplicateOf) {
      return { kind: "duplicate", reportId: body.reportId, duplicateOf: body.duplicateOf };
    }
    return { kind: "submitted", reportId: body.reportId };
  } catch {
    const text = [
      `Issue report for ${request.paperId}`,
      request.snippet ? `Snippet: ${request.snippet}` : "",
      request.description,
    ]
      .filter(Boolean)
      .join("\n");
    await clipboard.writeText(text);
    return { kind: "clipboard-fallback" };
  }
}

/** Build the POST body from the dialog state plus any live selection. */
export function buildReportRequest(
  id: string,
  description: string,
  snippet: string | undefined,
): ReportRequest {
  const request: ReportRequest = { paperId: id, description };
  if (snippet !== undefined) {
    request.snippet = snippet;
  }
  return request;
}

// ---------------------------------------------------------------- dialog

function makeDialog(doc: Document, serverUrl: string, snippet: string | undefined): HTMLElement {
  const id = paperId(doc);
  const overlay = doc.createElement("div");
  overlay.className = "reader-dialog";
  overlay.setAttribute("role", "dialog");
  overlay.setAttribute("aria-label", "Report an issue");

  const prior = doc.createElement("ul");
  prior.className = "prior-reports";
  prior.setAttribute("aria-label", "Reports already received for this article");

  const label = doc.createElement("label");
  label.textContent = "Describe the problem";
  const input = doc.createElement("textarea");
  input.required = true;
  label.appendChild(input);

  const status = doc.createElement("p");
  status.className = "dialog-status";
  status.setAttribute("role", "status");
  if (snippet !== undefined) {
    status.textContent = "Your current selection will be attached.";
  }

  const send = doc.createElement("button");
  send.type = "button";
  send.textContent = "Send report";
  const close = doc.createElement("button");
  close.type = "button";
  close.textContent = "Close";
  close.addEventListener("click", () => overlay.remove());

  send.addEventListener("click", async () => {
    const request = buildReportRequest(id, input.value, snippet);
    const outcome = await submitReport(serverUrl, request);
    if (outcome.kind === "duplicate") {
      status.textContent =
        `Thanks — this looks like a report we already have (${outcome.duplicateOf}).`;
    } else if (outcome.kind === "submitted") {
      status.textContent = `Report received: ${outcome.reportId}.`;
    } else {
      status.textContent =
        "The report service is unreachable; your text was copied to the clipboard.";
    }
  });

  overlay.append(prior, label, status, send, close);

  void fetchPriorReports(serverUrl, id).then((reports) => {
    for (const report of reports) {
      const item = doc.createElement("li");
      item.textContent = report.snippet
        ? `${report.description} — “${report.snippet}”`
        : report.description;
      prior.appendChild(item);
    }
  });
  return overlay;
}

// ------------------------------------------------------------------ init

function makeControls(doc: Document, storage: Storage): HTMLElement {
  const bar = doc.createElement("div");
  bar.className = "reader-controls";
  bar.setAttribute("role", "group");
  bar.setAttribute("aria-label", "Reading preferences");

  const themeLabel = doc.createElement("label");
  themeLabel.textContent = "Theme";
  const themeSelect = doc.createElement("select");
  for (const value of ["auto", "light", "dark"] as Theme[]) {
    const option = doc.createElement("option");
    option.value = value;
    option.textContent = value;
    themeSelect.appendChild(option);
  }
  themeSelect.value = storedTheme(storage);
  themeSelect.addEventListener("change", () =>
    setTheme(themeSelect.value as Theme, doc, storage),
  );
  themeLabel.appendChild(themeSelect);

  const fontLabel = doc.createElement("label");
  fontLabel.textContent = "Text size";
  const fontSelect = doc.createElement("select");
  for (const scale of FONT_SCALES) {
    const option = doc.createElement("option");
    option.value = String(scale);
    option.textContent = `${scale}%`;
    fontSelect.appendChild(option);
  }
  fontSelect.value = String(storedFontScale(storage));
  fontSelect.addEventListener("change", () =>
    setFontScale(Number(fontSelect.value) as FontScale, doc, storage),
  );
  fontLabel.appendChild(fontSelect);

  bar.append(themeLabel, fontLabel);
  return bar;
}

/** Wire everything to the current page. */
export function initReader(options: ReaderOptions = {}): void {
  const doc = options.doc ?? document;
  const storage = options.storage ?? localStorage;
  const serverUrl = options.serverUrl ?? "";

  // Restore persisted preferences before first paint settles.
  setTheme(storedTheme(storage), doc, storage);
  setFontScale(storedFontScale(storage), doc, storage);

  const header = doc.querySelector("header");
  if (header) {
    header.appendChild(makeControls(doc, storage));
  }

  const button = doc.querySelector('[data-role="report-issue"]');
  button?.addEventListener("click", () => {
    // Capture before the click moves focus and collapses the selection.
    const snippet = captureSnippet(doc);
    doc.body.appendChild(makeDialog(doc, serverUrl, snippet));
  });
}
